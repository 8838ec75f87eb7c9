//! Boundary-value polynomials.

/// Polynomial in a local coordinate `x` starting at zero, coefficients in
/// ascending order.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    pub coeffs: Vec<f64>,
}

impl Poly {
    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    pub fn d1(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for (k, c) in self.coeffs.iter().enumerate().skip(1).rev() {
            acc = acc * x + k as f64 * c;
        }
        acc
    }

    pub fn d2(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for (k, c) in self.coeffs.iter().enumerate().skip(2).rev() {
            acc = acc * x + (k * (k - 1)) as f64 * c;
        }
        acc
    }

    /// Quintic meeting value, first and second derivative at `0` and `len`.
    pub fn quintic(start: [f64; 3], end: [f64; 3], len: f64) -> Poly {
        let [x0, v0, a0] = start;
        let [x1, v1, a1] = end;
        let (l2, l3) = (len * len, len * len * len);
        let (l4, l5) = (l3 * len, l3 * l2);
        let c0 = x0;
        let c1 = v0;
        let c2 = 0.5 * a0;
        // Residuals after the start terms, solved in closed form.
        let r0 = x1 - (c0 + c1 * len + c2 * l2);
        let r1 = v1 - (c1 + 2.0 * c2 * len);
        let r2 = a1 - 2.0 * c2;
        let c3 = (10.0 * r0 - 4.0 * r1 * len + 0.5 * r2 * l2) / l3;
        let c4 = (-15.0 * r0 + 7.0 * r1 * len - r2 * l2) / l4;
        let c5 = (6.0 * r0 - 3.0 * r1 * len + 0.5 * r2 * l2) / l5;
        Poly { coeffs: vec![c0, c1, c2, c3, c4, c5] }
    }

    /// Quartic meeting value, first and second derivative at `0` and first
    /// and second derivative at `len`; the end value is free.
    pub fn quartic(start: [f64; 3], end: [f64; 2], len: f64) -> Poly {
        let [x0, v0, a0] = start;
        let [v1, a1] = end;
        let c2 = 0.5 * a0;
        let r1 = v1 - (v0 + a0 * len);
        let r2 = a1 - a0;
        let c3 = (3.0 * r1 - r2 * len) / (3.0 * len * len);
        let c4 = (-2.0 * r1 + r2 * len) / (4.0 * len * len * len);
        Poly { coeffs: vec![x0, v0, c2, c3, c4] }
    }

    /// Cubic meeting value and first derivative at `0` and `len`.
    pub fn cubic(start: [f64; 2], end: [f64; 2], len: f64) -> Poly {
        let [x0, v0] = start;
        let [x1, v1] = end;
        let r0 = x1 - x0 - v0 * len;
        let r1 = v1 - v0;
        let c2 = (3.0 * r0 - r1 * len) / (len * len);
        let c3 = (-2.0 * r0 + r1 * len) / (len * len * len);
        Poly { coeffs: vec![x0, v0, c2, c3] }
    }
}
