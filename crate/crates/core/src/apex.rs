//! Online apex detection.
//!
//! Candidates are local maxima of the curvature magnitude over the
//! optimization horizon. Around each candidate a window of length `l` is
//! scanned for the point with the lowest quasi-steady admissible speed,
//! which becomes the apex. Away from flat ground that point can sit off the
//! curvature peak, since slope and bank change the normal load.

use serde::{Deserialize, Serialize};

use crate::ggcon::GgModel;
use crate::grip::GripMap;
use crate::pointmass::{build_horizon, RoadPoint};
use crate::track3d::Track3D;

/// Curvature magnitude below which a point never limits the speed.
pub const MIN_CURVATURE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ApexSearchConfig {
    /// Optimization horizon ahead of the vehicle [m].
    pub h_opt: f64,
    /// Grid spacing of the horizon [m].
    pub ds: f64,
    /// Search window length around each candidate [m].
    pub l: f64,
    /// Fixed-point tolerance [m/s].
    pub epsilon: f64,
    pub max_iter: usize,
    /// Minimum peak prominence of `|omega_z|` [1/m].
    pub prominence: f64,
}

impl Default for ApexSearchConfig {
    fn default() -> Self {
        ApexSearchConfig { h_opt: 600.0, ds: 1.0, l: 60.0, epsilon: 0.01, max_iter: 20, prominence: 0.002 }
    }
}

impl ApexSearchConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.h_opt > 0.0 && self.ds > 0.0 && self.l > 0.0 && self.epsilon > 0.0) {
            return Err("h_opt, ds, l and epsilon must be positive".into());
        }
        if self.max_iter == 0 {
            return Err("max_iter must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Apex {
    pub s_apex: f64,
    pub v_apex: f64,
    /// False when the fixed point did not settle and the initial guess was
    /// used instead.
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AdmissibleSpeed {
    Limited { v: f64, converged: bool },
    /// Zero curvature: no lateral limit applies.
    Unbounded,
}

impl AdmissibleSpeed {
    pub fn speed(&self) -> Option<f64> {
        match *self {
            AdmissibleSpeed::Limited { v, .. } => Some(v),
            AdmissibleSpeed::Unbounded => None,
        }
    }
}

/// Fixed-point iterates for the admissible speed at one point, starting at
/// `sqrt(alpha) * v_off`. The last entry is the answer when `converged`.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointTrace {
    pub guess: f64,
    pub iterates: Vec<f64>,
    pub converged: bool,
}

pub(crate) fn fixed_point_trace(point: &RoadPoint, gg: &GgModel, config: &ApexSearchConfig) -> Option<FixedPointTrace> {
    let curvature = point.omega_z.abs();
    if curvature < MIN_CURVATURE {
        return None;
    }
    let guess = point.alpha.sqrt() * point.v_off;
    // Gravity along the road normal either helps or hurts depending on
    // which way the line turns.
    let gravity = point.omega_z.signum() * point.lateral_gravity();
    let mut iterates = Vec::with_capacity(config.max_iter);
    let mut v_old = guess;
    for _ in 0..config.max_iter {
        let a_hat_y = point.diamond(gg, v_old).lateral_limit() - gravity;
        let v_new = (a_hat_y.max(0.0) / curvature).sqrt();
        iterates.push(v_new);
        if (v_new - v_old).abs() < config.epsilon {
            return Some(FixedPointTrace { guess, iterates, converged: true });
        }
        v_old = v_new;
    }
    Some(FixedPointTrace { guess, iterates, converged: false })
}

pub(crate) fn admissible_at(point: &RoadPoint, gg: &GgModel, config: &ApexSearchConfig) -> AdmissibleSpeed {
    match fixed_point_trace(point, gg, config) {
        None => AdmissibleSpeed::Unbounded,
        Some(trace) if trace.converged => {
            AdmissibleSpeed::Limited { v: *trace.iterates.last().unwrap_or(&trace.guess), converged: true }
        }
        Some(trace) => AdmissibleSpeed::Limited { v: trace.guess, converged: false },
    }
}

/// Quasi-steady admissible speed at `s` for grip `alpha`, seeded from the
/// offline speed `v_off`.
pub fn admissible_velocity(
    track: &Track3D,
    s: f64,
    gg: &GgModel,
    alpha: f64,
    v_off: f64,
    config: &ApexSearchConfig,
) -> AdmissibleSpeed {
    let mut point = RoadPoint::from_track(track, s, alpha);
    point.v_off = v_off;
    admissible_at(&point, gg, config)
}

/// Same as [`admissible_velocity`] but returns every iterate.
pub fn admissible_velocity_trace(
    track: &Track3D,
    s: f64,
    gg: &GgModel,
    alpha: f64,
    v_off: f64,
    config: &ApexSearchConfig,
) -> Option<FixedPointTrace> {
    let mut point = RoadPoint::from_track(track, s, alpha);
    point.v_off = v_off;
    fixed_point_trace(&point, gg, config)
}

/// Indices of prominent local maxima of `values`, ascending. Plateaus count
/// once, at their middle; window edges never count. Among peaks closer than
/// `min_separation` samples the taller one survives.
pub(crate) fn prominent_peaks(values: &[f64], min_prominence: f64, min_separation: usize) -> Vec<usize> {
    let n = values.len();
    let mut peaks = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if values[i] > values[i - 1] {
            let mut j = i;
            while j + 1 < n && values[j + 1] == values[i] {
                j += 1;
            }
            if j + 1 < n && values[j + 1] < values[i] {
                peaks.push((i + j) / 2);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    let prominence = |p: usize| {
        let h = values[p];
        let mut left = h;
        for &v in values[..p].iter().rev() {
            if v > h {
                break;
            }
            left = left.min(v);
        }
        let mut right = h;
        for &v in &values[p + 1..] {
            if v > h {
                break;
            }
            right = right.min(v);
        }
        h - left.max(right)
    };
    let mut ranked: Vec<usize> = peaks.into_iter().filter(|&p| prominence(p) >= min_prominence).collect();
    ranked.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let mut kept: Vec<usize> = Vec::new();
    for p in ranked {
        if kept.iter().all(|&k| k.abs_diff(p) >= min_separation) {
            kept.push(p);
        }
    }
    kept.sort_unstable();
    kept
}

pub(crate) fn candidate_indices(points: &[RoadPoint], config: &ApexSearchConfig) -> Vec<usize> {
    let curvature: Vec<f64> = points.iter().map(|p| p.omega_z.abs()).collect();
    let separation = (config.l / config.ds).round() as usize;
    prominent_peaks(&curvature, config.prominence, separation)
}

/// Apexes over precomputed horizon points, as `(index, apex)` ascending.
pub(crate) fn apexes_on(points: &[RoadPoint], gg: &GgModel, config: &ApexSearchConfig) -> Vec<(usize, Apex)> {
    let half = (0.5 * config.l / config.ds).round() as usize;
    let last = points.len().saturating_sub(1);
    let mut found: Vec<(usize, Apex)> = candidate_indices(points, config)
        .into_iter()
        .filter_map(|c| {
            let lo = c.saturating_sub(half);
            let hi = (c + half).min(last);
            let mut best: Option<(usize, f64, bool)> = None;
            for (i, p) in points.iter().enumerate().take(hi + 1).skip(lo) {
                if let AdmissibleSpeed::Limited { v, converged } = admissible_at(p, gg, config) {
                    if best.is_none_or(|(_, bv, _)| v < bv) {
                        best = Some((i, v, converged));
                    }
                }
            }
            best.map(|(i, v, converged)| (i, Apex { s_apex: points[i].s, v_apex: v, converged }))
        })
        .collect();
    found.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.v_apex.total_cmp(&b.1.v_apex)));
    let mut merged: Vec<(usize, Apex)> = Vec::with_capacity(found.len());
    for (i, apex) in found {
        match merged.last_mut() {
            Some((j, prev)) if i - *j <= 1 => {
                if apex.v_apex < prev.v_apex {
                    *j = i;
                    *prev = apex;
                }
            }
            _ => merged.push((i, apex)),
        }
    }
    merged
}

/// Apex candidates over `[s_start, s_start + h_opt]`, as arclengths.
pub fn find_candidates(track: &Track3D, s_start: f64, config: &ApexSearchConfig) -> Vec<f64> {
    let points = build_horizon(track, &GripMap::default(), s_start, config.h_opt, config.ds);
    candidate_indices(&points, config).into_iter().map(|i| points[i].s).collect()
}

pub fn locate_apexes(
    track: &Track3D,
    s_start: f64,
    gg: &GgModel,
    grip: &GripMap,
    config: &ApexSearchConfig,
) -> Vec<Apex> {
    let points = build_horizon(track, grip, s_start, config.h_opt, config.ds);
    apexes_on(&points, gg, config).into_iter().map(|(_, a)| a).collect()
}
