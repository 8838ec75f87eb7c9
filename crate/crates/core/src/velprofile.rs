//! Minimum-time velocity profile along the reference line.
//!
//! The horizon is split at the apexes. Every segment gets a backward pass
//! from its terminating apex speed and a forward pass from its starting
//! speed; the profile is their pointwise minimum. All integration assumes
//! constant acceleration between grid points.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::apex::{apexes_on, Apex, ApexSearchConfig};
use crate::ggcon::GgModel;
use crate::grip::GripMap;
use crate::pointmass::{build_horizon, RoadPoint};
use crate::track3d::Track3D;

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("profiles sampled on different grids ({0} vs {1} samples)")]
    GridMismatch(usize, usize),
    #[error("profile stalls: zero speed over the interval starting at sample {0}")]
    Stall(usize),
    #[error("invalid profile input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Part of the horizon between two apexes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub s_from: f64,
    pub s_to: f64,
    /// Apex speed at `s_to`, or `None` when the horizon ends before the
    /// next apex and only the forward pass constrains the segment.
    pub v_end: Option<f64>,
}

/// Splits `[s_start, s_end]` at the apexes, which must be sorted.
pub fn segment_horizon(apexes: &[Apex], s_start: f64, s_end: f64) -> Vec<Segment> {
    let mut segments = Vec::with_capacity(apexes.len() + 1);
    let mut from = s_start;
    for apex in apexes {
        segments.push(Segment { s_from: from, s_to: apex.s_apex, v_end: Some(apex.v_apex) });
        from = apex.s_apex;
    }
    if from < s_end || segments.is_empty() {
        segments.push(Segment { s_from: from, s_to: s_end, v_end: None });
    }
    segments
}

/// Speeds and the acceleration held from each sample to the next.
#[derive(Debug, Clone, PartialEq)]
pub struct Pass {
    pub v: Vec<f64>,
    pub a: Vec<f64>,
}

/// Upper speed bound per sample: `v_max` and the quasi-steady lateral
/// limit of the sample's own grip.
pub fn speed_caps(points: &[RoadPoint], gg: &GgModel, v_max: f64) -> Vec<f64> {
    points.iter().map(|p| p.lateral_speed_limit(gg, v_max)).collect()
}

/// Explicit forward integration with the largest feasible acceleration.
/// When a cap is hit the stored acceleration is the one that lands on it.
pub fn forward_pass(points: &[RoadPoint], caps: &[f64], gg: &GgModel, ds: f64, v_start: f64) -> Pass {
    let n = points.len();
    let mut v = vec![0.0; n];
    let mut a = vec![0.0; n];
    if n == 0 {
        return Pass { v, a };
    }
    v[0] = v_start;
    for i in 0..n - 1 {
        let a_max = points[i].forward_hat(gg, v[i]);
        let v2 = v[i] * v[i] + 2.0 * ds * a_max;
        let next = v2.max(0.0).sqrt().min(caps[i + 1]);
        v[i + 1] = next;
        a[i] = (next * next - v[i] * v[i]) / (2.0 * ds);
    }
    a[n - 1] = if n > 1 { a[n - 2] } else { 0.0 };
    Pass { v, a }
}

/// Backward integration from `v_end` at the last sample. Each step picks
/// the largest start speed whose own braking potential reaches the next
/// sample, so every interval is feasible at its start state.
pub fn backward_pass(points: &[RoadPoint], caps: &[f64], gg: &GgModel, ds: f64, v_end: f64) -> Pass {
    let n = points.len();
    let mut v = vec![0.0; n];
    let mut a = vec![0.0; n];
    if n == 0 {
        return Pass { v, a };
    }
    v[n - 1] = v_end.min(caps[n - 1]);
    for i in (0..n - 1).rev() {
        v[i] = points[i].backward_step(gg, v[i + 1], ds, caps[i]);
        a[i] = (v[i + 1] * v[i + 1] - v[i] * v[i]) / (2.0 * ds);
    }
    a[n - 1] = if n > 1 { a[n - 2] } else { 0.0 };
    Pass { v, a }
}

/// Pointwise minimum. Each sample keeps the acceleration of the pass that
/// set its speed; ties keep the forward value.
pub fn combine(fw: &Pass, bw: &Pass) -> Result<Pass, ProfileError> {
    if fw.v.len() != bw.v.len() || fw.a.len() != fw.v.len() || bw.a.len() != bw.v.len() {
        return Err(ProfileError::GridMismatch(fw.v.len(), bw.v.len()));
    }
    let (v, a) = fw
        .v
        .iter()
        .zip(&bw.v)
        .enumerate()
        .map(|(i, (&f, &b))| if f <= b { (f, fw.a[i]) } else { (b, bw.a[i]) })
        .unzip();
    Ok(Pass { v, a })
}

/// Trapezoidal timestamps, exact under constant acceleration.
pub fn update_timestamps(v: &[f64], ds: f64) -> Result<Vec<f64>, ProfileError> {
    let mut t = Vec::with_capacity(v.len());
    let mut now = 0.0;
    for (i, &vi) in v.iter().enumerate() {
        if i > 0 {
            let sum = v[i - 1] + vi;
            if sum <= 0.0 {
                return Err(ProfileError::Stall(i - 1));
            }
            now += 2.0 * ds / sum;
        }
        t.push(now);
    }
    Ok(t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VelocityProfile {
    /// Unwrapped arclength, uniformly spaced.
    pub s: Vec<f64>,
    pub v: Vec<f64>,
    /// Velocity-frame acceleration held from sample `i` to `i + 1`.
    pub a_hat_x: Vec<f64>,
    pub t: Vec<f64>,
    pub alpha_used: Vec<f64>,
    pub apexes: Vec<Apex>,
}

/// Speed, acceleration and time at a point inside a profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileState {
    pub s: f64,
    pub v: f64,
    pub a: f64,
    pub t: f64,
}

impl VelocityProfile {
    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    pub fn ds(&self) -> f64 {
        if self.s.len() > 1 {
            self.s[1] - self.s[0]
        } else {
            0.0
        }
    }

    pub fn s_end(&self) -> f64 {
        *self.s.last().unwrap_or(&0.0)
    }

    pub fn duration(&self) -> f64 {
        *self.t.last().unwrap_or(&0.0)
    }

    fn interval_at(&self, s: f64) -> usize {
        let ds = self.ds();
        if ds <= 0.0 {
            return 0;
        }
        let i = ((s - self.s[0]) / ds).floor();
        (i.max(0.0) as usize).min(self.len().saturating_sub(2))
    }

    /// State at arclength `s`, clamped to the profile.
    pub fn at_s(&self, s: f64) -> ProfileState {
        if self.len() < 2 {
            let v = self.v.first().copied().unwrap_or(0.0);
            return ProfileState { s, v, a: 0.0, t: 0.0 };
        }
        let s = s.clamp(self.s[0], self.s_end());
        let i = self.interval_at(s);
        let a = self.a_hat_x[i];
        let d = s - self.s[i];
        let v = (self.v[i] * self.v[i] + 2.0 * a * d).max(0.0).sqrt();
        let sum = self.v[i] + v;
        let t = if sum > 0.0 { self.t[i] + 2.0 * d / sum } else { self.t[i] };
        ProfileState { s, v, a, t }
    }

    /// State at time `t` after the profile start, clamped to the profile.
    pub fn at_time(&self, t: f64) -> ProfileState {
        if self.len() < 2 {
            return self.at_s(self.s.first().copied().unwrap_or(0.0));
        }
        let t = t.clamp(0.0, self.duration());
        let i = self.t.partition_point(|&ti| ti <= t).saturating_sub(1).min(self.len() - 2);
        let tau = t - self.t[i];
        let a = self.a_hat_x[i];
        let d = (self.v[i] * tau + 0.5 * a * tau * tau).clamp(0.0, self.ds());
        ProfileState { s: self.s[i] + d, v: (self.v[i] + a * tau).max(0.0), a, t }
    }

    pub fn min_speed(&self) -> f64 {
        self.v.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("s,v,a_hat_x,t,alpha\n");
        for i in 0..self.len() {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                fmt9(self.s[i]),
                fmt9(self.v[i]),
                fmt9(self.a_hat_x[i]),
                fmt9(self.t[i]),
                fmt9(self.alpha_used[i])
            );
        }
        out
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<(), ProfileError> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// Nine significant digits, trailing zeros removed.
pub fn fmt9(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x.is_finite() { "0".into() } else { format!("{x}") };
    }
    let s = format!("{:.8e}", x);
    let (mantissa, exp) = s.split_once('e').unwrap_or((&s, "0"));
    let exp: i32 = exp.parse().unwrap_or(0);
    let value: f64 = format!("{mantissa}e{exp}").parse().unwrap_or(x);
    if (-5..15).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        let mut out = format!("{:.*}", decimals, value);
        if out.contains('.') {
            out = out.trim_end_matches('0').trim_end_matches('.').to_string();
        }
        if out == "-0" {
            out = "0".into();
        }
        out
    } else {
        let m = mantissa.trim_end_matches('0').trim_end_matches('.');
        format!("{m}e{exp}")
    }
}

/// Profile over the horizon starting at `s_start` with speed `v_start`.
pub fn generate_profile(
    track: &Track3D,
    gg: &GgModel,
    grip: &GripMap,
    v_start: f64,
    v_max: f64,
    s_start: f64,
    config: &ApexSearchConfig,
) -> Result<VelocityProfile, ProfileError> {
    config.validate().map_err(ProfileError::Invalid)?;
    grip.validate().map_err(ProfileError::Invalid)?;
    if !(v_start >= 0.0 && v_start.is_finite()) {
        return Err(ProfileError::Invalid(format!("start speed {v_start} must be finite and >= 0")));
    }
    if !(v_max > 0.0) {
        return Err(ProfileError::Invalid(format!("v_max {v_max} must be positive")));
    }
    let points = build_horizon(track, grip, s_start, config.h_opt, config.ds);
    if points.len() < 2 {
        return Err(ProfileError::Invalid("horizon shorter than one grid step".into()));
    }
    profile_on(&points, gg, v_start, v_max, config)
}

pub(crate) fn profile_on(
    points: &[RoadPoint],
    gg: &GgModel,
    v_start: f64,
    v_max: f64,
    config: &ApexSearchConfig,
) -> Result<VelocityProfile, ProfileError> {
    let ds = config.ds;
    let n = points.len();
    let caps = speed_caps(points, gg, v_max);
    let found = apexes_on(points, gg, config);

    // Boundaries between segments as sample indices, with the apex speed
    // each boundary is pinned to.
    let mut bounds: Vec<(usize, Option<f64>)> = vec![(0, None)];
    for (i, apex) in &found {
        if *i > 0 {
            bounds.push((*i, Some(apex.v_apex.min(caps[*i]))));
        }
    }
    if bounds.last().map(|b| b.0) != Some(n - 1) {
        bounds.push((n - 1, None));
    }

    // Backward passes run from the far end so an apex never promises more
    // speed than the following segment can brake away.
    let mut bw = vec![0.0; n];
    let mut bw_a = vec![0.0; n];
    let mut carry = f64::INFINITY;
    for k in (1..bounds.len()).rev() {
        let (lo, hi) = (bounds[k - 1].0, bounds[k].0);
        let v_end = bounds[k].1.unwrap_or(f64::INFINITY).min(carry);
        let pass = backward_pass(&points[lo..=hi], &caps[lo..=hi], gg, ds, v_end);
        bw[lo..=hi].copy_from_slice(&pass.v);
        bw_a[lo..hi].copy_from_slice(&pass.a[..hi - lo]);
        carry = pass.v[0];
    }
    if let Some(&(_, Some(v))) = bounds.first() {
        bw[0] = bw[0].min(v);
    }

    // Forward passes, each seeded with the combined speed at its start.
    let mut fw = vec![0.0; n];
    let mut fw_a = vec![0.0; n];
    let mut seed = v_start;
    for k in 1..bounds.len() {
        let (lo, hi) = (bounds[k - 1].0, bounds[k].0);
        let pass = forward_pass(&points[lo..=hi], &caps[lo..=hi], gg, ds, seed);
        fw[lo..=hi].copy_from_slice(&pass.v);
        fw_a[lo..hi].copy_from_slice(&pass.a[..hi - lo]);
        seed = pass.v[hi - lo].min(bw[hi]);
    }
    let Pass { mut v, .. } = combine(&Pass { v: fw, a: fw_a }, &Pass { v: bw, a: bw_a })?;

    // The minimum of two passes can pair a sample from one pass with a
    // neighbour from the other at a speed neither pass started from.
    // One forward sweep restores reachability.
    for i in 0..n - 1 {
        let reach = v[i] * v[i] + 2.0 * ds * points[i].forward_hat(gg, v[i]);
        let reach = reach.max(0.0).sqrt();
        if v[i + 1] > reach {
            v[i + 1] = reach;
        }
    }

    let mut a: Vec<f64> = (0..n - 1).map(|i| (v[i + 1] * v[i + 1] - v[i] * v[i]) / (2.0 * ds)).collect();
    a.push(*a.last().unwrap_or(&0.0));
    let t = update_timestamps(&v, ds)?;
    Ok(VelocityProfile {
        s: points.iter().map(|p| p.s).collect(),
        v,
        a_hat_x: a,
        t,
        alpha_used: points.iter().map(|p| p.alpha).collect(),
        apexes: found.into_iter().map(|(_, apex)| apex).collect(),
    })
}

/// Largest gg violation over the profile's intervals, each checked at its
/// start state. Zero means every interval is feasible.
pub fn max_violation(track: &Track3D, gg: &GgModel, profile: &VelocityProfile) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..profile.len().saturating_sub(1) {
        let p = RoadPoint::from_track(track, profile.s[i], profile.alpha_used[i]);
        let f = p.check(gg, profile.v[i], profile.a_hat_x[i]);
        worst = worst.max(f.diamond_violation).max(f.engine_violation);
    }
    worst
}
