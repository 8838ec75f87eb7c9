//! Analytic test tracks with known curvature and angle functions.

use std::f64::consts::PI;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::apex::ApexSearchConfig;
use crate::ggcon::GgModel;
use crate::grip::GripMap;
use crate::track3d::{Track3D, TrackError, TrackPoint};
use crate::velprofile::generate_profile;

/// Raised-cosine bump: zero outside `[center - length/2, center + length/2]`,
/// `amplitude` at `center`, continuous first derivative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: f64,
    pub length: f64,
    pub amplitude: f64,
}

impl Bump {
    pub fn value(&self, s: f64) -> f64 {
        let u = (s - self.center) / self.length + 0.5;
        if (0.0..=1.0).contains(&u) {
            self.amplitude * 0.5 * (1.0 - (2.0 * PI * u).cos())
        } else {
            0.0
        }
    }

    /// Integral from the bump start up to `s`.
    pub fn integral(&self, s: f64) -> f64 {
        let u = ((s - self.center) / self.length + 0.5).clamp(0.0, 1.0);
        self.amplitude * 0.5 * self.length * (u - (2.0 * PI * u).sin() / (2.0 * PI))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TrackKind {
    Straight { length: f64 },
    /// Closed flat circle.
    Circle { radius: f64 },
    /// Open constant-radius arc with constant bank angle [rad].
    BankedArc { radius: f64, bank_angle: f64, length: f64 },
    /// Straight, left turn of radius `r1`, gap, right turn of radius `r2`,
    /// straight. Curvature follows raised-cosine bumps of length `turn`, so
    /// each turn has a single curvature peak at its middle.
    Chicane { r1: f64, r2: f64, straight: f64, turn: f64, gap: f64 },
}

impl TrackKind {
    pub fn chicane() -> Self {
        TrackKind::Chicane { r1: 40.0, r2: 55.0, straight: 200.0, turn: 60.0, gap: 40.0 }
    }

    /// 300 m variant of [`TrackKind::chicane`].
    pub fn short_chicane() -> Self {
        TrackKind::Chicane { r1: 40.0, r2: 55.0, straight: 70.0, turn: 60.0, gap: 40.0 }
    }

    /// Arclengths of the chicane's curvature peaks.
    pub fn chicane_peaks(&self) -> Option<[f64; 2]> {
        match *self {
            TrackKind::Chicane { straight, turn, gap, .. } => {
                Some([straight + 0.5 * turn, straight + 1.5 * turn + gap])
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticTrack {
    #[serde(flatten)]
    pub kind: TrackKind,
    pub ds: f64,
    /// Half width on each side of the reference line [m].
    pub half_width: f64,
    /// Slope added on top of the kind's own angles [rad].
    pub slope: Option<Bump>,
    /// Bank added on top of the kind's own angles [rad].
    pub bank: Option<Bump>,
    /// Speed cap used when solving the offline reference speed.
    pub v_max: f64,
}

impl Default for SyntheticTrack {
    fn default() -> Self {
        SyntheticTrack { kind: TrackKind::chicane(), ds: 1.0, half_width: 6.0, slope: None, bank: None, v_max: 80.0 }
    }
}

impl SyntheticTrack {
    pub fn new(kind: TrackKind) -> Self {
        SyntheticTrack { kind, ..Default::default() }
    }

    pub fn validate(&self) -> Result<(), String> {
        let positive = |name: &str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(format!("{name} must be positive, got {x}"))
            }
        };
        positive("ds", self.ds)?;
        positive("v_max", self.v_max)?;
        if !(self.half_width >= 0.0) {
            return Err(format!("half_width must be >= 0, got {}", self.half_width));
        }
        match self.kind {
            TrackKind::Straight { length } => positive("length", length),
            TrackKind::Circle { radius } => positive("radius", radius),
            TrackKind::BankedArc { radius, length, bank_angle: bank } => {
                positive("radius", radius)?;
                positive("length", length)?;
                if bank.abs() >= 0.5 * PI {
                    return Err(format!("bank {bank} rad is not below 90 degrees"));
                }
                Ok(())
            }
            TrackKind::Chicane { r1, r2, straight, turn, gap } => {
                positive("r1", r1)?;
                positive("r2", r2)?;
                positive("turn", turn)?;
                if straight < 0.0 || gap < 0.0 {
                    return Err("straight and gap must be >= 0".into());
                }
                Ok(())
            }
        }
    }

    fn length(&self) -> f64 {
        match self.kind {
            TrackKind::Straight { length } | TrackKind::BankedArc { length, .. } => length,
            TrackKind::Circle { radius } => 2.0 * PI * radius,
            TrackKind::Chicane { straight, turn, gap, .. } => 2.0 * straight + 2.0 * turn + gap,
        }
    }

    /// Heading, slope and bank at `s`.
    fn angles(&self, s: f64) -> (f64, f64, f64) {
        let extra = |b: &Option<Bump>| b.map_or(0.0, |b| b.value(s));
        let (theta, base_bank) = match self.kind {
            TrackKind::Straight { .. } => (0.0, 0.0),
            TrackKind::Circle { radius } => (s / radius, 0.0),
            TrackKind::BankedArc { radius, bank_angle: bank, .. } => (s / radius, bank),
            TrackKind::Chicane { .. } => {
                let (left, right) = self.chicane_bumps();
                (left.integral(s) - right.integral(s), 0.0)
            }
        };
        (theta, extra(&self.slope), base_bank + extra(&self.bank))
    }

    fn chicane_bumps(&self) -> (Bump, Bump) {
        match (self.kind, self.kind.chicane_peaks()) {
            (TrackKind::Chicane { r1, r2, turn, .. }, Some([c1, c2])) => (
                Bump { center: c1, length: turn, amplitude: 1.0 / r1 },
                Bump { center: c2, length: turn, amplitude: 1.0 / r2 },
            ),
            _ => unreachable!("chicane bumps on a non-chicane track"),
        }
    }

    /// Track geometry with a placeholder offline speed of `v_max`.
    pub fn geometry(&self) -> Result<Track3D, TrackError> {
        self.validate().map_err(|message| TrackError::Invariant { index: 0, message })?;
        let length = self.length();
        let n = ((length / self.ds).round() as usize).max(1);
        let step = length / n as f64;
        let closed = matches!(self.kind, TrackKind::Circle { .. });
        let mut points = Vec::with_capacity(n + 1);
        let mut position = Vector3::zeros();
        const SUBSTEPS: usize = 20;
        for i in 0..=n {
            let s = i as f64 * step;
            let (theta, mu, phi) = self.angles(s);
            position = match self.kind {
                TrackKind::Circle { radius } | TrackKind::BankedArc { radius, .. }
                    if self.slope.is_none() =>
                {
                    Vector3::new(radius * theta.sin(), radius * (1.0 - theta.cos()), 0.0)
                }
                _ if i == 0 => Vector3::zeros(),
                _ => {
                    // Simpson's rule on the tangent over the last step.
                    let h = step / SUBSTEPS as f64;
                    let mut p = position;
                    for k in 0..SUBSTEPS {
                        let a = s - step + k as f64 * h;
                        let tangent = |x: f64| {
                            let (th, m, _) = self.angles(x);
                            Vector3::new(th.cos() * m.cos(), th.sin() * m.cos(), -m.sin())
                        };
                        p += (tangent(a) + tangent(a + 0.5 * h) * 4.0 + tangent(a + h)) * (h / 6.0);
                    }
                    p
                }
            };
            points.push(TrackPoint {
                s,
                position,
                phi,
                mu,
                theta,
                w_left: self.half_width,
                w_right: self.half_width,
                v_off: self.v_max,
            });
        }
        if closed {
            points[n].position = points[0].position;
        }
        Track3D::new(points, closed)
    }

    /// Track geometry with the offline speed solved at full grip.
    pub fn build(&self, gg: &GgModel) -> Result<Track3D, TrackError> {
        let track = self.geometry()?;
        let lap = track.s_lap();
        let solver_err = |e: crate::velprofile::ProfileError| TrackError::Invariant { index: 0, message: e.to_string() };
        let (profile, offset) = if track.is_closed() {
            // Two laps from the line at top speed; the second lap no longer
            // remembers the start speed.
            let config = ApexSearchConfig { h_opt: 2.0 * lap, ..Default::default() };
            let p = generate_profile(&track, gg, &GripMap::default(), self.v_max, self.v_max, 0.0, &config)
                .map_err(solver_err)?;
            (p, lap)
        } else {
            let config = ApexSearchConfig { h_opt: lap, ds: self.ds.min(lap), ..Default::default() };
            let p = generate_profile(&track, gg, &GripMap::default(), self.v_max, self.v_max, 0.0, &config)
                .map_err(solver_err)?;
            (p, 0.0)
        };
        let v_off: Vec<f64> = track
            .points()
            .iter()
            .map(|p| profile.at_s(p.s + offset).v.max(MIN_OFFLINE_SPEED))
            .collect();
        track.with_offline_speed(&v_off)
    }
}

/// Floor on generated offline speeds; the track format requires `v_off > 0`.
pub const MIN_OFFLINE_SPEED: f64 = 1.0;

/// Builds a synthetic track, offline speed included.
pub fn generate_synthetic_track(spec: &SyntheticTrack, gg: &GgModel) -> Result<Track3D, TrackError> {
    spec.build(gg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn bump_integral_matches_quadrature() {
        let b = Bump { center: 10.0, length: 8.0, amplitude: 0.5 };
        assert_abs_diff_eq!(b.integral(100.0), 0.5 * 0.5 * 8.0, epsilon = 1e-12);
        let steps = 50_000;
        let h = 5.0 / steps as f64;
        let sum: f64 = (0..steps)
            .map(|k| {
                let x = 6.0 + k as f64 * h;
                0.5 * h * (b.value(x) + b.value(x + h))
            })
            .sum();
        assert_abs_diff_eq!(b.integral(11.0), sum, epsilon = 1e-8);
    }

    #[test]
    fn circle_closes_with_constant_curvature() {
        let t = SyntheticTrack::new(TrackKind::Circle { radius: 100.0 }).geometry().unwrap();
        assert!(t.is_closed());
        for s in [0.0, 10.3, 300.0, 620.0] {
            assert_abs_diff_eq!(t.angular_rate(s).omega_z, 0.01, epsilon = 1e-9);
        }
    }

    #[test]
    fn chicane_heading_returns_to_a_known_value() {
        let spec = SyntheticTrack::new(TrackKind::chicane());
        let t = spec.geometry().unwrap();
        let end = t.points().last().unwrap();
        assert_abs_diff_eq!(end.theta, 0.5 * 60.0 * (1.0 / 40.0 - 1.0 / 55.0), epsilon = 1e-12);
        assert_abs_diff_eq!(t.s_lap(), 560.0, epsilon = 1e-9);
        let [c1, c2] = spec.kind.chicane_peaks().unwrap();
        // Node derivatives are central differences over 2 m, which average
        // the peak: kappa * (1 - sinc-like factor) ~ 2.3e-5 here.
        assert_abs_diff_eq!(t.angular_rate(c1).omega_z, 1.0 / 40.0, epsilon = 5e-5);
        assert_abs_diff_eq!(t.angular_rate(c2).omega_z, -1.0 / 55.0, epsilon = 5e-5);
    }

    #[test]
    fn chicane_positions_follow_the_heading() {
        let t = SyntheticTrack::new(TrackKind::chicane()).geometry().unwrap();
        let pts = t.points();
        for w in pts.windows(2) {
            let chord = (w[1].position - w[0].position).norm();
            assert!((chord - 1.0).abs() < 1e-3, "chord {chord}");
        }
    }
}
