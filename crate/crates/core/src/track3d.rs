//! Three-dimensional track representation around a race-line spine.
//!
//! The drivable surface is a strip of flat planes attached to a spine curve
//! `c(s)`. Each plane is oriented by Euler angles in zyx order: heading
//! `theta`, slope `mu` and bank `phi`. All queries take an arclength `s`;
//! closed tracks wrap it into `[0, s_lap)`, open tracks clamp it to their
//! domain.

use std::fmt::Write as _;
use std::io::Read;
use std::path::Path;

use nalgebra::{Rotation3, Vector3};
use thiserror::Error;

/// Tolerance for the closure of a closed spine, in metres.
pub const CLOSURE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum TrackError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("point {index}: {message}")]
    Invariant { index: usize, message: String },
    #[error("track I/O failed: {0}")]
    Io(#[from] std::io::Error),
}

/// One discretization point of the spine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackPoint {
    pub s: f64,
    pub position: Vector3<f64>,
    pub phi: f64,
    pub mu: f64,
    pub theta: f64,
    pub w_left: f64,
    pub w_right: f64,
    /// Offline reference speed along the race line.
    pub v_off: f64,
}

/// Orthonormal road frame attached to the spine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoadFramePose {
    pub origin: Vector3<f64>,
    pub t: Vector3<f64>,
    pub n: Vector3<f64>,
    pub b: Vector3<f64>,
}

/// Angular velocity of the road frame per metre of progress, expressed in
/// the road frame. `omega_z` is the curvature of the reference line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngularRate {
    pub omega_x: f64,
    pub omega_y: f64,
    pub omega_z: f64,
}

impl AngularRate {
    /// Maps Euler angles and their progress derivatives onto the road-frame
    /// angular rate.
    pub fn from_euler(phi: f64, mu: f64, dphi: f64, dmu: f64, dtheta: f64) -> Self {
        let (s_phi, c_phi) = phi.sin_cos();
        let (s_mu, c_mu) = mu.sin_cos();
        AngularRate {
            omega_x: dphi - s_mu * dtheta,
            omega_y: c_phi * dmu + c_mu * s_phi * dtheta,
            omega_z: -s_phi * dmu + c_mu * c_phi * dtheta,
        }
    }
}

/// Everything the solvers need at one arclength, interpolated once.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackSample {
    pub s: f64,
    pub position: Vector3<f64>,
    pub phi: f64,
    pub mu: f64,
    pub theta: f64,
    pub dphi: f64,
    pub dmu: f64,
    pub dtheta: f64,
    pub w_left: f64,
    pub w_right: f64,
    pub v_off: f64,
}

impl TrackSample {
    pub fn angular_rate(&self) -> AngularRate {
        AngularRate::from_euler(self.phi, self.mu, self.dphi, self.dmu, self.dtheta)
    }

    pub fn pose(&self) -> RoadFramePose {
        let rot = Rotation3::from_euler_angles(self.phi, self.mu, self.theta);
        RoadFramePose {
            origin: self.position,
            t: rot * Vector3::x(),
            n: rot * Vector3::y(),
            b: rot * Vector3::z(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Track3D {
    points: Vec<TrackPoint>,
    s_lap: f64,
    closed: bool,
    // Node derivatives of the Euler angles with respect to s.
    dphi: Vec<f64>,
    dmu: Vec<f64>,
    dtheta: Vec<f64>,
}

fn wrap_pi(a: f64) -> f64 {
    let r = (a + std::f64::consts::PI).rem_euclid(std::f64::consts::TAU) - std::f64::consts::PI;
    if r <= -std::f64::consts::PI {
        r + std::f64::consts::TAU
    } else {
        r
    }
}

impl Track3D {
    /// Builds a track from raw points. `s` is re-based to start at zero and
    /// the heading is unwrapped onto a continuous branch.
    pub fn new(mut points: Vec<TrackPoint>, closed: bool) -> Result<Self, TrackError> {
        if points.len() < 2 {
            return Err(TrackError::Invariant {
                index: points.len(),
                message: "a track needs at least two points".into(),
            });
        }
        for (i, p) in points.iter().enumerate() {
            let finite = p.s.is_finite()
                && p.position.iter().all(|x| x.is_finite())
                && [p.phi, p.mu, p.theta, p.w_left, p.w_right, p.v_off]
                    .iter()
                    .all(|x| x.is_finite());
            if !finite {
                return Err(TrackError::Invariant { index: i, message: "non-finite value".into() });
            }
            if p.w_left < 0.0 || p.w_right < 0.0 {
                return Err(TrackError::Invariant {
                    index: i,
                    message: format!("negative track width ({}, {})", p.w_left, p.w_right),
                });
            }
            if p.v_off <= 0.0 {
                return Err(TrackError::Invariant {
                    index: i,
                    message: format!("offline speed must be positive, got {}", p.v_off),
                });
            }
            if i > 0 && p.s <= points[i - 1].s {
                return Err(TrackError::Invariant {
                    index: i,
                    message: format!("s not strictly increasing ({} after {})", p.s, points[i - 1].s),
                });
            }
        }
        let s0 = points[0].s;
        if s0 != 0.0 {
            for p in &mut points {
                p.s -= s0;
            }
        }
        for i in 1..points.len() {
            let step = wrap_pi(points[i].theta - points[i - 1].theta);
            points[i].theta = points[i - 1].theta + step;
        }
        let last = points.len() - 1;
        if closed {
            let gap = (points[last].position - points[0].position).norm();
            if gap > CLOSURE_TOLERANCE {
                return Err(TrackError::Invariant {
                    index: last,
                    message: format!("closed track does not close: endpoint gap {gap:.3e} m"),
                });
            }
        }
        let s_lap = points[last].s;
        let mut track = Track3D {
            points,
            s_lap,
            closed,
            dphi: Vec::new(),
            dmu: Vec::new(),
            dtheta: Vec::new(),
        };
        track.dphi = track.node_derivative(|p| p.phi);
        track.dmu = track.node_derivative(|p| p.mu);
        track.dtheta = track.node_derivative(|p| p.theta);
        Ok(track)
    }

    fn node_derivative(&self, f: impl Fn(&TrackPoint) -> f64) -> Vec<f64> {
        let pts = &self.points;
        let n = pts.len();
        let diff = |a: usize, b: usize, ds: f64| wrap_pi(f(&pts[b]) - f(&pts[a])) / ds;
        let mut out = vec![0.0; n];
        if self.closed && n > 2 {
            // The last point duplicates the first; derivatives are periodic.
            let unique = n - 1;
            for i in 0..unique {
                let (prev, prev_s) = if i == 0 {
                    (unique - 1, pts[unique - 1].s - self.s_lap)
                } else {
                    (i - 1, pts[i - 1].s)
                };
                out[i] = diff(prev, i + 1, pts[i + 1].s - prev_s);
            }
            out[n - 1] = out[0];
        } else {
            out[0] = diff(0, 1, pts[1].s - pts[0].s);
            out[n - 1] = diff(n - 2, n - 1, pts[n - 1].s - pts[n - 2].s);
            for i in 1..n - 1 {
                out[i] = diff(i - 1, i + 1, pts[i + 1].s - pts[i - 1].s);
            }
        }
        out
    }

    pub fn points(&self) -> &[TrackPoint] {
        &self.points
    }

    pub fn s_lap(&self) -> f64 {
        self.s_lap
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    /// Maps any progress onto the track domain: modulo `s_lap` on closed
    /// tracks, clamped to `[0, s_lap]` on open ones.
    pub fn wrap_progress(&self, s: f64) -> f64 {
        if self.closed {
            let r = s.rem_euclid(self.s_lap);
            if r >= self.s_lap {
                0.0
            } else {
                r
            }
        } else {
            s.clamp(0.0, self.s_lap)
        }
    }

    /// Signed progress difference `to - from`, shortest way around on closed
    /// tracks.
    pub fn progress_delta(&self, from: f64, to: f64) -> f64 {
        let d = to - from;
        if self.closed {
            let half = 0.5 * self.s_lap;
            (d + half).rem_euclid(self.s_lap) - half
        } else {
            d
        }
    }

    fn locate(&self, s: f64) -> (usize, f64) {
        let s = self.wrap_progress(s);
        let pts = &self.points;
        let idx = pts.partition_point(|p| p.s <= s);
        let i = idx.saturating_sub(1).min(pts.len() - 2);
        let lambda = ((s - pts[i].s) / (pts[i + 1].s - pts[i].s)).clamp(0.0, 1.0);
        (i, lambda)
    }

    /// Interpolates every stored quantity at `s`.
    pub fn sample(&self, s: f64) -> TrackSample {
        let (i, l) = self.locate(s);
        let a = &self.points[i];
        let b = &self.points[i + 1];
        let lerp = |x: f64, y: f64| x + l * (y - x);
        TrackSample {
            s: lerp(a.s, b.s),
            position: a.position + (b.position - a.position) * l,
            phi: lerp(a.phi, b.phi),
            mu: lerp(a.mu, b.mu),
            theta: lerp(a.theta, b.theta),
            dphi: lerp(self.dphi[i], self.dphi[i + 1]),
            dmu: lerp(self.dmu[i], self.dmu[i + 1]),
            dtheta: lerp(self.dtheta[i], self.dtheta[i + 1]),
            w_left: lerp(a.w_left, b.w_left),
            w_right: lerp(a.w_right, b.w_right),
            v_off: lerp(a.v_off, b.v_off),
        }
    }

    pub fn angular_rate(&self, s: f64) -> AngularRate {
        self.sample(s).angular_rate()
    }

    pub fn pose_at(&self, s: f64) -> RoadFramePose {
        self.sample(s).pose()
    }

    pub fn frenet_to_cartesian(&self, s: f64, n: f64) -> Vector3<f64> {
        let pose = self.pose_at(s);
        pose.origin + pose.n * n
    }

    /// Parses the track CSV format. See [`Track3D::to_csv`].
    pub fn from_csv_reader<R: Read>(mut reader: R) -> Result<Self, TrackError> {
        let mut text = String::new();
        reader.read_to_string(&mut text)?;
        Self::from_csv_str(&text)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TrackError> {
        let file = std::fs::File::open(path)?;
        Self::from_csv_reader(file)
    }

    pub fn from_csv_str(text: &str) -> Result<Self, TrackError> {
        const HEADER: [&str; 10] =
            ["s", "x", "y", "z", "phi", "mu", "theta", "w_left", "w_right", "v_off"];
        let mut closed = false;
        let mut header_seen = false;
        let mut points = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let lineno = lineno + 1;
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(value) = comment.trim().strip_prefix("closed=") {
                    closed = match value.trim() {
                        "true" => true,
                        "false" => false,
                        other => {
                            return Err(TrackError::Parse {
                                line: lineno,
                                message: format!("closed must be true or false, got `{other}`"),
                            })
                        }
                    };
                }
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if !header_seen {
                if fields != HEADER {
                    return Err(TrackError::Parse {
                        line: lineno,
                        message: format!("expected header `{}`", HEADER.join(",")),
                    });
                }
                header_seen = true;
                continue;
            }
            if fields.len() != HEADER.len() {
                return Err(TrackError::Parse {
                    line: lineno,
                    message: format!("expected {} fields, found {}", HEADER.len(), fields.len()),
                });
            }
            let mut v = [0.0; 10];
            for (slot, field) in v.iter_mut().zip(&fields) {
                *slot = field.parse().map_err(|_| TrackError::Parse {
                    line: lineno,
                    message: format!("invalid number `{field}`"),
                })?;
            }
            points.push(TrackPoint {
                s: v[0],
                position: Vector3::new(v[1], v[2], v[3]),
                phi: v[4],
                mu: v[5],
                theta: v[6],
                w_left: v[7],
                w_right: v[8],
                v_off: v[9],
            });
        }
        if !header_seen {
            return Err(TrackError::Parse { line: 0, message: "missing header".into() });
        }
        Track3D::new(points, closed)
    }

    /// Serializes with shortest round-trip float formatting, so
    /// `from_csv_str(to_csv())` reproduces the track bit for bit.
    pub fn to_csv(&self) -> String {
        self.csv_with(|x| x.to_string())
    }

    /// Serializes with nine significant digits.
    pub fn to_csv_fixed(&self) -> String {
        self.csv_with(crate::velprofile::fmt9)
    }

    fn csv_with(&self, fmt: impl Fn(f64) -> String) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# closed={}", self.closed);
        out.push_str("s,x,y,z,phi,mu,theta,w_left,w_right,v_off\n");
        for p in &self.points {
            let row = [p.s, p.position.x, p.position.y, p.position.z, p.phi, p.mu, p.theta, p.w_left, p.w_right, p.v_off];
            let cells: Vec<String> = row.into_iter().map(&fmt).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), TrackError> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    /// Replaces the offline reference speed column.
    pub fn with_offline_speed(mut self, v_off: &[f64]) -> Result<Self, TrackError> {
        if v_off.len() != self.points.len() {
            return Err(TrackError::Invariant {
                index: v_off.len().min(self.points.len()),
                message: format!(
                    "offline speed has {} entries for {} points",
                    v_off.len(),
                    self.points.len()
                ),
            });
        }
        for (i, (p, &v)) in self.points.iter_mut().zip(v_off).enumerate() {
            if !(v > 0.0 && v.is_finite()) {
                return Err(TrackError::Invariant {
                    index: i,
                    message: format!("offline speed must be positive, got {v}"),
                });
            }
            p.v_off = v;
        }
        Ok(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn straight(n: usize, ds: f64) -> Track3D {
        let points = (0..n)
            .map(|i| TrackPoint {
                s: i as f64 * ds,
                position: Vector3::new(i as f64 * ds, 0.0, 0.0),
                phi: 0.0,
                mu: 0.0,
                theta: 0.0,
                w_left: 5.0,
                w_right: 5.0,
                v_off: 30.0,
            })
            .collect();
        Track3D::new(points, false).unwrap()
    }

    fn arc(radius: f64, phi: f64, len: usize) -> Track3D {
        let points = (0..len)
            .map(|i| {
                let s = i as f64;
                let th = s / radius;
                TrackPoint {
                    s,
                    position: Vector3::new(radius * th.sin(), radius * (1.0 - th.cos()), 0.0),
                    phi,
                    mu: 0.0,
                    theta: th,
                    w_left: 5.0,
                    w_right: 5.0,
                    v_off: 30.0,
                }
            })
            .collect();
        Track3D::new(points, false).unwrap()
    }

    #[test]
    fn straight_csv_loads_with_expected_length() {
        let csv = "# closed=false\n\
                   s,x,y,z,phi,mu,theta,w_left,w_right,v_off\n\
                   0,0,0,0,0,0,0,5,5,30\n\
                   2,2,0,0,0,0,0,5,5,30\n\
                   4,4,0,0,0,0,0,5,5,30\n\
                   6,6,0,0,0,0,0,5,5,30\n";
        let track = Track3D::from_csv_str(csv).unwrap();
        assert_eq!(track.s_lap(), 6.0);
        assert!(!track.is_closed());
        assert!(track.points().iter().all(|p| p.phi == 0.0 && p.mu == 0.0 && p.theta == 0.0));
    }

    #[test]
    fn s_is_rebased_to_zero() {
        let csv = "s,x,y,z,phi,mu,theta,w_left,w_right,v_off\n\
                   10,0,0,0,0,0,0,5,5,30\n\
                   11,1,0,0,0,0,0,5,5,30\n";
        let track = Track3D::from_csv_str(csv).unwrap();
        assert_eq!(track.points()[0].s, 0.0);
        assert_eq!(track.s_lap(), 1.0);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let csv = "# comment\ns,x,y,z,phi,mu,theta,w_left,w_right,v_off\n0,0,0,0,0,0,0,5,5,30\n1,1,0,zz,0,0,0,5,5,30\n";
        match Track3D::from_csv_str(csv) {
            Err(TrackError::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
        let bad_header = "s,x,y\n";
        assert!(matches!(Track3D::from_csv_str(bad_header), Err(TrackError::Parse { line: 1, .. })));
    }

    #[test]
    fn invariant_errors_name_the_offending_point() {
        let csv = "s,x,y,z,phi,mu,theta,w_left,w_right,v_off\n\
                   0,0,0,0,0,0,0,5,5,30\n\
                   1,1,0,0,0,0,0,5,5,30\n\
                   1,2,0,0,0,0,0,5,5,30\n";
        assert!(matches!(Track3D::from_csv_str(csv), Err(TrackError::Invariant { index: 2, .. })));
        let csv = "s,x,y,z,phi,mu,theta,w_left,w_right,v_off\n\
                   0,0,0,0,0,0,0,5,5,30\n\
                   1,1,0,0,0,0,0,-1,5,30\n";
        assert!(matches!(Track3D::from_csv_str(csv), Err(TrackError::Invariant { index: 1, .. })));
    }

    #[test]
    fn closed_circle_with_gap_is_rejected() {
        let r = 100.0;
        let n = 628;
        let ds = 2.0 * PI * r / n as f64;
        let mut csv = String::from("# closed=true\ns,x,y,z,phi,mu,theta,w_left,w_right,v_off\n");
        for i in 0..=n {
            let s = i as f64 * ds;
            let th = s / r;
            let mut x = r * th.sin();
            if i == n {
                x += 0.1;
            }
            csv.push_str(&format!("{s},{x},{},0,0,0,{th},5,5,30\n", r * (1.0 - th.cos())));
        }
        match Track3D::from_csv_str(&csv) {
            Err(TrackError::Invariant { index, message }) => {
                assert_eq!(index, n);
                assert!(message.contains("close"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn wrap_progress_examples() {
        let points = (0..=100)
            .map(|i| {
                let th = i as f64 / 100.0 * std::f64::consts::TAU;
                let r = 100.0 / std::f64::consts::TAU;
                TrackPoint {
                    s: i as f64,
                    position: Vector3::new(r * th.sin(), r * (1.0 - th.cos()), 0.0),
                    phi: 0.0,
                    mu: 0.0,
                    theta: th,
                    w_left: 5.0,
                    w_right: 5.0,
                    v_off: 20.0,
                }
            })
            .collect();
        let track = Track3D::new(points, true).unwrap();
        assert_eq!(track.wrap_progress(100.0), 0.0);
        assert_eq!(track.wrap_progress(-1.0), 99.0);
        assert_eq!(track.wrap_progress(250.0), 50.0);
        assert!(track.wrap_progress(-1e-17) < 100.0);
    }

    #[test]
    fn angular_rate_on_straight_and_flat_circle() {
        let s = straight(20, 1.0);
        let w = s.angular_rate(7.3);
        assert_eq!((w.omega_x, w.omega_y, w.omega_z), (0.0, 0.0, 0.0));
        let c = arc(100.0, 0.0, 200);
        for s in [0.0, 10.5, 99.0, 199.0] {
            let w = c.angular_rate(s);
            assert_abs_diff_eq!(w.omega_x, 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(w.omega_y, 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(w.omega_z, 0.01, epsilon = 1e-12);
        }
    }

    #[test]
    fn angular_rate_on_banked_arc() {
        let c = arc(100.0, 30f64.to_radians(), 200);
        let w = c.angular_rate(50.0);
        assert_abs_diff_eq!(w.omega_x, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(w.omega_y, 0.005, epsilon = 1e-9);
        assert_abs_diff_eq!(w.omega_z, 0.0086603, epsilon = 1e-7);
    }

    #[test]
    fn pose_examples() {
        let s = straight(5, 1.0);
        let p = s.pose_at(0.0);
        assert_abs_diff_eq!((p.t - Vector3::x()).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!((p.b - Vector3::z()).norm(), 0.0, epsilon = 1e-15);
        let banked = arc(50.0, FRAC_PI_2, 20);
        let p = banked.pose_at(3.0);
        assert_abs_diff_eq!(p.n.z, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn frenet_offset_on_straight_and_banked_arc() {
        let s = straight(10, 1.0);
        assert_eq!(s.frenet_to_cartesian(3.5, 0.0), Vector3::new(3.5, 0.0, 0.0));
        let p = s.frenet_to_cartesian(3.5, 2.0);
        assert_abs_diff_eq!((p - Vector3::new(3.5, 2.0, 0.0)).norm(), 0.0, epsilon = 1e-12);
        let banked = arc(100.0, 20f64.to_radians(), 50);
        let p = banked.frenet_to_cartesian(10.0, 3.0);
        let spine = banked.sample(10.0).position;
        assert_abs_diff_eq!(p.z - spine.z, 3.0 * 20f64.to_radians().sin(), epsilon = 1e-12);
    }

    #[test]
    fn heading_is_unwrapped_on_load() {
        let mut pts: Vec<TrackPoint> = (0..4)
            .map(|i| TrackPoint {
                s: i as f64,
                position: Vector3::new(i as f64, 0.0, 0.0),
                phi: 0.0,
                mu: 0.0,
                theta: 0.0,
                w_left: 1.0,
                w_right: 1.0,
                v_off: 1.0,
            })
            .collect();
        pts[0].theta = PI - 0.01;
        pts[1].theta = -PI + 0.01;
        pts[2].theta = -PI + 0.03;
        pts[3].theta = -PI + 0.05;
        let t = Track3D::new(pts, false).unwrap();
        assert_abs_diff_eq!(t.points()[1].theta, PI + 0.01, epsilon = 1e-12);
        assert_abs_diff_eq!(t.angular_rate(1.0).omega_z, 0.02, epsilon = 1e-12);
    }
}
