//! Frenet states in the time and arclength domains.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Motion along the reference line as functions of time.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct FrenetState {
    pub s: f64,
    pub s_dot: f64,
    pub s_ddot: f64,
    pub n: f64,
    pub n_dot: f64,
    pub n_ddot: f64,
}

/// The same motion parametrized by arclength. `s_ddot_s` is `d(s_dot)/ds`,
/// primes are derivatives with respect to `s`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SpatialState {
    pub s: f64,
    pub s_dot: f64,
    pub s_ddot_s: f64,
    pub n: f64,
    pub n_prime: f64,
    pub n_pprime: f64,
}

#[derive(Debug, Error, PartialEq)]
#[error("spatial parametrization needs s_dot > 0, got {0}")]
pub struct DomainError(pub f64);

pub fn to_spatial(x: &FrenetState) -> Result<SpatialState, DomainError> {
    if !(x.s_dot > 0.0) {
        return Err(DomainError(x.s_dot));
    }
    let n_prime = x.n_dot / x.s_dot;
    Ok(SpatialState {
        s: x.s,
        s_dot: x.s_dot,
        s_ddot_s: x.s_ddot / x.s_dot,
        n: x.n,
        n_prime,
        n_pprime: (x.n_ddot - n_prime * x.s_ddot) / (x.s_dot * x.s_dot),
    })
}

pub fn to_temporal(x: &SpatialState) -> Result<FrenetState, DomainError> {
    if !(x.s_dot > 0.0) {
        return Err(DomainError(x.s_dot));
    }
    let s_ddot = x.s_ddot_s * x.s_dot;
    Ok(FrenetState {
        s: x.s,
        s_dot: x.s_dot,
        s_ddot,
        n: x.n,
        n_dot: x.n_prime * x.s_dot,
        n_ddot: x.n_pprime * x.s_dot * x.s_dot + x.n_prime * s_ddot,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn worked_example() {
        let x = FrenetState { s: 10.0, s_dot: 40.0, s_ddot: 4.0, n: 1.0, n_dot: 2.0, n_ddot: 0.0 };
        let y = to_spatial(&x).unwrap();
        assert_abs_diff_eq!(y.n_prime, 0.05, epsilon = 1e-15);
        assert_abs_diff_eq!(y.n_pprime, -1.25e-4, epsilon = 1e-15);
        assert_abs_diff_eq!(y.s_ddot_s, 0.1, epsilon = 1e-15);
        let z = to_temporal(&y).unwrap();
        assert_abs_diff_eq!(z.n_ddot, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn rest_is_rejected() {
        let x = FrenetState::default();
        assert_eq!(to_spatial(&x), Err(DomainError(0.0)));
    }
}
