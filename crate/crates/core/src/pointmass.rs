//! Quasi-steady point-mass relations for a vehicle on the reference line.
//!
//! On the reference line the velocity frame coincides with the road frame
//! (`chi_hat = 0`), the lateral acceleration is `v^2 * omega_z` and the
//! pitch rate of the velocity frame is `omega_y * v`.

use crate::ggcon::{Diamond, Feasibility, GgModel, GRAVITY};
use crate::grip::GripMap;
use crate::track3d::Track3D;

const BISECTION_STEPS: usize = 80;

/// Geometry and grip at one arclength of the reference line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoadPoint {
    pub s: f64,
    pub omega_y: f64,
    pub omega_z: f64,
    pub phi: f64,
    pub mu: f64,
    pub alpha: f64,
    pub v_off: f64,
    s_phi: f64,
    c_phi: f64,
    s_mu: f64,
    c_mu: f64,
}

impl RoadPoint {
    pub fn new(s: f64, omega_y: f64, omega_z: f64, phi: f64, mu: f64, alpha: f64, v_off: f64) -> Self {
        let (s_phi, c_phi) = phi.sin_cos();
        let (s_mu, c_mu) = mu.sin_cos();
        RoadPoint { s, omega_y, omega_z, phi, mu, alpha, v_off, s_phi, c_phi, s_mu, c_mu }
    }

    pub fn from_track(track: &Track3D, s: f64, alpha: f64) -> Self {
        let smp = track.sample(s);
        let w = smp.angular_rate();
        RoadPoint::new(s, w.omega_y, w.omega_z, smp.phi, smp.mu, alpha, smp.v_off)
    }

    /// Apparent normal acceleration used for the gg lookup.
    pub fn g_tilde(&self, v: f64) -> f64 {
        self.omega_y * v * v + GRAVITY * self.c_mu * self.c_phi
    }

    /// Apparent lateral acceleration when driving the reference line at `v`.
    pub fn lateral_app(&self, v: f64) -> f64 {
        v * v * self.omega_z + GRAVITY * self.c_mu * self.s_phi
    }

    /// Offset between apparent and velocity-frame longitudinal acceleration:
    /// `ax_app = ax_hat + longitudinal_gravity()`.
    pub fn longitudinal_gravity(&self) -> f64 {
        -GRAVITY * self.s_mu
    }

    /// Lateral gravity component, `ay_app = ay_hat + lateral_gravity()`.
    pub fn lateral_gravity(&self) -> f64 {
        GRAVITY * self.c_mu * self.s_phi
    }

    pub fn diamond(&self, gg: &GgModel, v: f64) -> Diamond {
        gg.diamond(v, self.g_tilde(v), self.alpha)
    }

    /// Largest velocity-frame acceleration at speed `v`.
    pub fn forward_hat(&self, gg: &GgModel, v: f64) -> f64 {
        self.diamond(gg, v).forward_potential(self.lateral_app(v)) - self.longitudinal_gravity()
    }

    /// Strongest velocity-frame deceleration at speed `v` (negative).
    pub fn backward_hat(&self, gg: &GgModel, v: f64) -> f64 {
        self.diamond(gg, v).backward_potential(self.lateral_app(v)) - self.longitudinal_gravity()
    }

    pub fn laterally_feasible(&self, gg: &GgModel, v: f64) -> bool {
        self.lateral_app(v).abs() <= self.diamond(gg, v).lateral_limit()
    }

    /// Gg check of a velocity-frame longitudinal acceleration `a_hat` at
    /// speed `v`.
    pub fn check(&self, gg: &GgModel, v: f64, a_hat: f64) -> Feasibility {
        self.diamond(gg, v).check(a_hat + self.longitudinal_gravity(), self.lateral_app(v))
    }

    /// Largest speed in `[0, v_cap]` whose lateral demand fits the
    /// diamond's lateral axis.
    pub fn lateral_speed_limit(&self, gg: &GgModel, v_cap: f64) -> f64 {
        if self.laterally_feasible(gg, v_cap) {
            return v_cap;
        }
        if !self.laterally_feasible(gg, 0.0) {
            return 0.0;
        }
        bisect_last_true(0.0, v_cap, |v| self.laterally_feasible(gg, v))
    }

    /// Largest `v_i` in `[0, v_cap]` that reaches `v_next` one interval of
    /// length `ds` later while braking no harder than the potential at
    /// `v_i` allows.
    pub fn backward_step(&self, gg: &GgModel, v_next: f64, ds: f64, v_cap: f64) -> f64 {
        let ok = |v: f64| v * v - v_next * v_next + 2.0 * ds * self.backward_hat(gg, v) <= 0.0;
        if ok(v_cap) {
            return v_cap;
        }
        if !ok(0.0) {
            return 0.0;
        }
        let mut hi = v_cap;
        if !hi.is_finite() {
            hi = (2.0 * v_next).max(1.0);
            while ok(hi) {
                hi *= 2.0;
            }
        }
        bisect_last_true(0.0, hi, ok)
    }
}

/// Number of intervals of length `ds` that fit into `h_opt` ahead of
/// `s_start` without running past the end of an open track.
pub fn horizon_intervals(track: &Track3D, s_start: f64, h_opt: f64, ds: f64) -> usize {
    let mut n = (h_opt / ds + 1e-9).floor().max(0.0) as usize;
    if !track.is_closed() {
        let room = ((track.s_lap() - s_start) / ds + 1e-9).floor().max(0.0) as usize;
        n = n.min(room);
    }
    n
}

/// Smallest grip over the track interval between two unwrapped arclengths.
pub fn interval_alpha(track: &Track3D, grip: &GripMap, a: f64, b: f64) -> f64 {
    let (wa, wb) = (track.wrap_progress(a), track.wrap_progress(b));
    if wb >= wa {
        grip.min_over(wa, wb)
    } else {
        grip.min_over(wa, track.s_lap()).min(grip.min_over(0.0, wb))
    }
}

/// Road points `s_start + i * ds` for `i = 0..=n` over the horizon. Each
/// point carries the smallest grip of the interval that starts there, so a
/// constant acceleration held over that interval never meets a lower
/// `alpha` than the one it was planned with.
pub fn build_horizon(track: &Track3D, grip: &GripMap, s_start: f64, h_opt: f64, ds: f64) -> Vec<RoadPoint> {
    let n = horizon_intervals(track, s_start, h_opt, ds);
    (0..=n)
        .map(|i| {
            let s = s_start + i as f64 * ds;
            let alpha = if i < n {
                interval_alpha(track, grip, s, s + ds)
            } else {
                grip.at(track.wrap_progress(s))
            };
            RoadPoint::from_track(track, s, alpha)
        })
        .collect()
}

/// Bisection for the boundary of a predicate that holds at `lo` and fails
/// at `hi`. Returns a point where it holds.
pub(crate) fn bisect_last_true(mut lo: f64, mut hi: f64, pred: impl Fn(f64) -> bool) -> f64 {
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if pred(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ggcon::AnalyticGg;
    use approx::assert_abs_diff_eq;

    #[test]
    fn lateral_limit_on_flat_circle() {
        let gg = GgModel::analytic(AnalyticGg::constant(12.0, 10.0, 15.0, 1.5));
        let p = RoadPoint::new(0.0, 0.0, 0.01, 0.0, 0.0, 1.0, 30.0);
        assert_abs_diff_eq!(p.lateral_speed_limit(&gg, 100.0), (15.0f64 / 0.01).sqrt(), epsilon = 1e-9);
        let p = RoadPoint { alpha: 0.5, ..p };
        assert_abs_diff_eq!(p.lateral_speed_limit(&gg, 100.0), (7.5f64 / 0.01).sqrt(), epsilon = 1e-9);
        assert_eq!(p.lateral_speed_limit(&gg, 20.0), 20.0);
    }

    #[test]
    fn backward_step_matches_uniform_braking_on_straight() {
        let gg = GgModel::analytic(AnalyticGg::constant(12.0, 10.0, 15.0, 1.5));
        let p = RoadPoint::new(0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 30.0);
        let v = p.backward_step(&gg, 20.0, 1.0, 100.0);
        assert_abs_diff_eq!(v, (400.0f64 + 24.0).sqrt(), epsilon = 1e-9);
        assert!(p.check(&gg, v, (400.0 - v * v) / 2.0).feasible);
    }

    #[test]
    fn downhill_adds_gravity_to_forward_potential() {
        let gg = GgModel::analytic(AnalyticGg::constant(12.0, 10.0, 15.0, 1.5));
        let mu = 5f64.to_radians();
        let flat = RoadPoint::new(0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 30.0);
        let down = RoadPoint::new(0.0, 0.0, 0.0, 0.0, mu, 1.0, 30.0);
        assert_abs_diff_eq!(
            down.forward_hat(&gg, 10.0) - flat.forward_hat(&gg, 10.0),
            GRAVITY * mu.sin(),
            epsilon = 1e-12
        );
    }
}
