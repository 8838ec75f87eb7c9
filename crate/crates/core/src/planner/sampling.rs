//! Candidate generation in the spatial and temporal domains.

use super::evaluate::kinematics;
use super::frenet::{FrenetState, SpatialState};
use super::poly::Poly;
use super::{CostBreakdown, HorizonKind, PlannerConfig, Trajectory, Verdicts};
use crate::track3d::Track3D;
use crate::velprofile::{ProfileState, VelocityProfile};

/// Lower bound on the reference's squared speed [m^2/s^2].
const W_FLOOR: f64 = 1e-9;

/// `count` evenly spaced values over `[lo, hi]` with the one closest to
/// zero replaced by zero, sorted and without duplicates.
fn grid_with_zero(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let mut out: Vec<f64> = if count <= 1 || hi <= lo {
        vec![0.0]
    } else {
        (0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect()
    };
    if let Some(k) = (0..out.len()).min_by(|&a, &b| out[a].abs().total_cmp(&out[b].abs())) {
        out[k] = 0.0;
    }
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

/// Lateral end offsets at arclength `s_end`, spanning the track width less
/// the margin on both sides. Zero is always included.
pub fn lateral_offsets(track: &Track3D, s_end: f64, config: &PlannerConfig) -> Vec<f64> {
    let smp = track.sample(s_end);
    let left = (smp.w_left - config.lateral_margin).max(0.0);
    let right = (smp.w_right - config.lateral_margin).max(0.0);
    grid_with_zero(-right, left, config.lateral_samples)
}

/// End speed offsets relative to the profile. Zero is always included.
pub fn velocity_offsets(config: &PlannerConfig) -> Vec<f64> {
    grid_with_zero(config.dv_min, config.dv_max, config.velocity_samples)
}

/// End speeds for a reference end speed, clamped from below and
/// deduplicated, paired with their offset from the reference.
fn end_speeds(v_ref: f64, config: &PlannerConfig) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::new();
    for dv in velocity_offsets(config) {
        let v = (v_ref + dv).max(config.v_end_min);
        if out.iter().all(|&(u, _)| u != v) {
            out.push((v, v - v_ref));
        }
    }
    out
}

fn blank(kind: HorizonKind, n_end: f64, dv_end: f64) -> Trajectory {
    Trajectory {
        samples: Vec::new(),
        kind,
        n_end,
        dv_end,
        cost: CostBreakdown::default(),
        verdicts: Verdicts::default(),
    }
}

/// Longitudinal shape of a spatial candidate relative to the profile's
/// squared speed `w_ref`, as a function of the distance `u` from the start.
enum Shape {
    /// `w_ref * r(u)` with `r` a Hermite cubic up to `ramp`, constant after.
    Ratio { cubic: Poly, ramp: f64, r_end: f64 },
    /// `w_ref * r_end + deficit * g(u)` with `g` a Hermite cubic falling
    /// from one to zero at `ramp`, flat at its end.
    Blend { deficit: f64, g: Poly, ramp: f64, r_end: f64 },
}

impl Shape {
    /// Squared speed and `s_ddot`.
    fn eval(&self, w_ref: f64, a_ref: f64, u: f64) -> (f64, f64) {
        match *self {
            Shape::Ratio { ref cubic, ramp, r_end } => {
                if u < ramp {
                    let r = cubic.eval(u);
                    (w_ref * r, a_ref * r + 0.5 * w_ref * cubic.d1(u))
                } else {
                    (w_ref * r_end, a_ref * r_end)
                }
            }
            Shape::Blend { deficit, ref g, ramp, r_end } => {
                if u < ramp {
                    (w_ref * r_end + deficit * g.eval(u), a_ref * r_end + 0.5 * deficit * g.d1(u))
                } else {
                    (w_ref * r_end, a_ref * r_end)
                }
            }
        }
    }
}

/// Candidates over a fixed arclength `S`. The squared speed `w = s_dot^2`
/// is the profile's scaled by a cubic ratio that moves from the start
/// speed onto the sampled end speed. The ratio one reproduces the profile
/// exactly, and any constant ratio below one scales the profile's whole
/// acceleration vector down, so it stays inside the gg-diagram. A Hermite
/// cubic between two positive ratios with flat ends stays positive, so
/// every such candidate can be time-parametrized.
///
/// A ratio cannot hold the start speed while the profile brakes, so
/// candidates below the profile also start at constant speed and close
/// their squared speed deficit additively over a few ramp lengths. These
/// catch up before brake points and apexes; any that reach zero speed are
/// dropped. The lateral offset is quintic in `s`.
pub fn sample_spatial(start: &SpatialState, profile: &VelocityProfile, track: &Track3D, config: &PlannerConfig) -> Vec<Trajectory> {
    let len = config.s_horizon;
    let s0 = start.s;
    let steps = (len / config.ds_fine).ceil().max(1.0) as usize;
    let h = len / steps as f64;
    let refs: Vec<ProfileState> = (0..=steps).map(|k| profile.at_s(s0 + k as f64 * h)).collect();
    let w_of = |r: &ProfileState| (r.v * r.v).max(W_FLOOR);
    let (w0, w_end) = (w_of(&refs[0]), w_of(&refs[steps]));
    let v_ref_end = refs[steps].v;
    // The reference sits on the gg boundary almost everywhere and its
    // acceleration jumps at brake points. A start slope mismatch overshoots
    // the reference by a third of the mismatch further on, so candidates
    // start on the (scaled) reference acceleration; the point mass has no
    // actuator dynamics to respect.
    let w_start = start.s_dot * start.s_dot;
    let ratio0 = w_start / w0;
    let mut shapes: Vec<(f64, Shape)> = Vec::new();
    for (v, dv) in end_speeds(v_ref_end, config) {
        let r_end = v * v / w_end;
        shapes.push((dv, Shape::Ratio { cubic: Poly::cubic([ratio0, 0.0], [r_end, 0.0], len), ramp: len, r_end }));
        let deficit = w_start - w0 * r_end;
        if deficit < 0.0 {
            // Zero start slope of w: the deficit term cancels the profile's.
            let g0 = -2.0 * refs[0].a * r_end / deficit;
            for j in 1..=config.ramp_samples {
                let ramp = len * j as f64 / config.ramp_samples as f64;
                let g = Poly::cubic([1.0, g0], [0.0, 0.0], ramp);
                shapes.push((dv, Shape::Blend { deficit, g, ramp, r_end }));
            }
        }
    }
    if config.brake_candidate {
        // Decelerates right away as hard as the reference does anywhere in
        // the horizon.
        let a_brake = refs.iter().map(|r| r.a).fold(0.0, f64::min);
        let slope = (2.0 * (a_brake - refs[0].a * ratio0) / w0).min(0.0);
        let r_end = config.v_end_min * config.v_end_min / w_end;
        let cubic = Poly::cubic([ratio0, slope], [r_end, 0.0], len);
        shapes.push((config.v_end_min - v_ref_end, Shape::Ratio { cubic, ramp: len, r_end }));
    }

    let offsets = lateral_offsets(track, s0 + len, config);
    let laterals: Vec<(f64, Poly)> = offsets
        .iter()
        .map(|&n_end| (n_end, Poly::quintic([start.n, start.n_prime, start.n_pprime], [n_end, 0.0, 0.0], len)))
        .collect();

    let mut out = Vec::new();
    for (dv, shape) in shapes {
        let w: Vec<f64> = (0..=steps).map(|k| shape.eval(w_of(&refs[k]), refs[k].a, k as f64 * h).0).collect();
        if w[..steps].iter().any(|&x| !(x > 0.0)) || !(w[steps] >= 0.0) {
            continue;
        }
        // Time along the fine grid, constant acceleration per step.
        let mut times = Vec::with_capacity(steps + 1);
        let mut t = 0.0;
        times.push(t);
        for k in 0..steps {
            t += 2.0 * h / (w[k].sqrt() + w[k + 1].sqrt());
            times.push(t);
        }
        let t_stop = t.min(config.t_horizon);
        let count = (t_stop / config.dt + 1e-9).floor() as usize;
        // Arclength of each output time, shared by all lateral offsets.
        let mut at = Vec::with_capacity(count + 1);
        let mut k = 0;
        for j in 0..=count {
            let tj = j as f64 * config.dt;
            while k + 1 < steps && times[k + 1] <= tj {
                k += 1;
            }
            let tau = tj - times[k];
            let a = (w[k + 1] - w[k]) / (2.0 * h);
            let d = (w[k].sqrt() * tau + 0.5 * a * tau * tau).clamp(0.0, h);
            let s = s0 + k as f64 * h + d;
            let r = profile.at_s(s);
            let u = s - s0;
            let (w_here, s_ddot) = shape.eval(w_of(&r), r.a, u);
            let s_dot = w_here.max(0.0).sqrt();
            if !(s_dot > 0.0) {
                break;
            }
            at.push((tj, s, s_dot, s_ddot));
        }
        for (n_end, lateral) in &laterals {
            let mut traj = blank(HorizonKind::Spatial, *n_end, dv);
            traj.samples = at
                .iter()
                .map(|&(tj, s, s_dot, s_ddot)| {
                    let u = s - s0;
                    let (n, n_p, n_pp) = (lateral.eval(u), lateral.d1(u), lateral.d2(u));
                    let state = FrenetState {
                        s,
                        s_dot,
                        s_ddot,
                        n,
                        n_dot: n_p * s_dot,
                        n_ddot: n_pp * s_dot * s_dot + n_p * s_ddot,
                    };
                    kinematics(track, tj, state, n_p, n_pp)
                })
                .collect();
            out.push(traj);
        }
    }
    out
}

/// Candidates over a fixed duration `T`: quartic progress ending on the
/// sampled speed with zero acceleration and free end position, quintic
/// lateral offset in time.
pub fn sample_temporal(start: &FrenetState, profile: &VelocityProfile, track: &Track3D, config: &PlannerConfig) -> Vec<Trajectory> {
    let horizon = config.t_horizon;
    let t_ref0 = profile.at_s(start.s).t;
    let v_target = profile.at_time(t_ref0 + horizon).v;
    let count = (horizon / config.dt + 1e-9).round() as usize;
    let ref_end = profile.at_time(t_ref0 + horizon).s;
    let offsets = lateral_offsets(track, ref_end, config);
    let mut out = Vec::new();
    let mut speeds = end_speeds(v_target, config);
    if config.brake_candidate {
        speeds.push((config.v_end_min, config.v_end_min - v_target));
    }
    for (v_end, dv) in speeds {
        let lon = Poly::quartic([start.s, start.s_dot, start.s_ddot], [v_end, 0.0], horizon);
        let times: Vec<f64> = (0..=count).map(|j| j as f64 * config.dt).collect();
        if times.iter().any(|&t| !(lon.d1(t) > 0.0)) {
            continue;
        }
        for &n_end in &offsets {
            let lat = Poly::quintic([start.n, start.n_dot, start.n_ddot], [n_end, 0.0, 0.0], horizon);
            let mut traj = blank(HorizonKind::Temporal, n_end, dv);
            traj.samples = times
                .iter()
                .map(|&t| {
                    let state = FrenetState {
                        s: lon.eval(t),
                        s_dot: lon.d1(t),
                        s_ddot: lon.d2(t),
                        n: lat.eval(t),
                        n_dot: lat.d1(t),
                        n_ddot: lat.d2(t),
                    };
                    let n_p = state.n_dot / state.s_dot;
                    let n_pp = (state.n_ddot - n_p * state.s_ddot) / (state.s_dot * state.s_dot);
                    kinematics(track, t, state, n_p, n_pp)
                })
                .collect();
            out.push(traj);
        }
    }
    out
}
