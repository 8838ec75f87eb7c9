//! Sampling-based local planner around the reference line.
//!
//! Candidates end at a grid of lateral offsets and end speeds. In the
//! spatial mode they span a fixed arclength, so their speed is tied to the
//! track position of the apexes; the temporal mode spans a fixed duration.
//! Every candidate is checked for curvature, track bounds, collisions and
//! gg feasibility and scored by six weighted cost integrals.

mod evaluate;
mod frenet;
mod poly;
mod sampling;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use evaluate::{check_feasibility, evaluate_cost, kinematics, obstacle_distance, Verdicts};
pub use frenet::{to_spatial, to_temporal, DomainError, FrenetState, SpatialState};
pub use poly::Poly;
pub use sampling::{lateral_offsets, sample_spatial, sample_temporal, velocity_offsets};

use crate::ggcon::GgModel;
use crate::grip::GripMap;
use crate::track3d::Track3D;
use crate::velprofile::{fmt9, VelocityProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HorizonKind {
    Spatial,
    Temporal,
}

/// Choice when no candidate passes every check. Both first avoid
/// collisions, leaving the track and exceeding the curvature limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fallback {
    /// The lowest end speed, then the least gg excess.
    Brake,
    /// The least gg excess.
    LeastViolating,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Weights {
    pub lateral: f64,
    pub curvature: f64,
    pub velocity: f64,
    pub risk: f64,
    pub severity: f64,
    pub accel: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Weights { lateral: 0.5, curvature: 5.0, velocity: 0.05, risk: 10.0, severity: 0.1, accel: 20.0 }
    }
}

impl Weights {
    pub fn as_array(&self) -> [f64; 6] {
        [self.lateral, self.curvature, self.velocity, self.risk, self.severity, self.accel]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    pub mode: HorizonKind,
    /// Temporal horizon; spatial candidates are cut to it as well [s].
    pub t_horizon: f64,
    /// Spatial horizon [m].
    pub s_horizon: f64,
    /// Latency compensation: the plan starts this far ahead on the
    /// previous trajectory [s].
    pub t_const: f64,
    pub lateral_samples: usize,
    /// Distance kept from the track edges by the outermost offsets [m].
    pub lateral_margin: f64,
    pub velocity_samples: usize,
    /// End speed offsets relative to the profile span `[dv_min, dv_max]`.
    pub dv_min: f64,
    pub dv_max: f64,
    /// Lowest end speed sampled [m/s].
    pub v_end_min: f64,
    /// Add a candidate that brakes right away down to `v_end_min`.
    pub brake_candidate: bool,
    /// Spatial candidates below the profile catch up over each of this
    /// many lengths, spread evenly up to `s_horizon`.
    pub ramp_samples: usize,
    pub fallback: Fallback,
    pub dt: f64,
    /// Arclength step used to integrate time along spatial candidates [m].
    pub ds_fine: f64,
    /// Minimum turning radius [m].
    pub turning_radius: f64,
    /// Tolerated excess of the gg inequality before a candidate becomes
    /// infeasible.
    pub slack: f64,
    pub weights: Weights,
    pub vehicle_half_length: f64,
    pub vehicle_half_width: f64,
    /// Inflation of obstacle footprints [m].
    pub obstacle_margin: f64,
    /// Decay length of the collision risk [m].
    pub risk_length: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            mode: HorizonKind::Spatial,
            t_horizon: 4.0,
            s_horizon: 200.0,
            t_const: 0.1,
            lateral_samples: 13,
            lateral_margin: 0.5,
            velocity_samples: 9,
            dv_min: -15.0,
            dv_max: 5.0,
            v_end_min: 1.0,
            brake_candidate: true,
            ramp_samples: 4,
            fallback: Fallback::Brake,
            dt: 0.05,
            ds_fine: 0.5,
            turning_radius: 6.0,
            slack: 0.1,
            weights: Weights::default(),
            vehicle_half_length: 2.5,
            vehicle_half_width: 1.0,
            obstacle_margin: 0.5,
            risk_length: 2.0,
        }
    }
}

impl PlannerConfig {
    pub fn kappa_max(&self) -> f64 {
        1.0 / self.turning_radius
    }

    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("t_horizon", self.t_horizon),
            ("s_horizon", self.s_horizon),
            ("dt", self.dt),
            ("ds_fine", self.ds_fine),
            ("turning_radius", self.turning_radius),
            ("risk_length", self.risk_length),
        ];
        for (name, x) in positive {
            if !(x > 0.0 && x.is_finite()) {
                return Err(format!("{name} must be positive, got {x}"));
            }
        }
        if !(self.t_const >= 0.0) || !(self.slack >= 0.0) {
            return Err("t_const and slack must be >= 0".into());
        }
        if self.lateral_samples == 0 || self.velocity_samples == 0 || self.ramp_samples == 0 {
            return Err("lateral, velocity and ramp sample counts must be at least 1".into());
        }
        if self.dv_min > self.dv_max {
            return Err(format!("dv_min {} above dv_max {}", self.dv_min, self.dv_max));
        }
        if self.weights.as_array().iter().any(|w| !(*w >= 0.0)) {
            return Err("weights must be >= 0".into());
        }
        Ok(())
    }
}

/// Static obstacle as a rectangle in Frenet coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub s: f64,
    pub n: f64,
    pub half_length: f64,
    pub half_width: f64,
}

/// One time sample of a candidate.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub state: FrenetState,
    pub n_prime: f64,
    pub n_pprime: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub v: f64,
    pub ax_hat: f64,
    pub ay_hat: f64,
    pub kappa: f64,
    pub chi: f64,
    pub ax_app: f64,
    pub ay_app: f64,
    pub g_tilde: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub lateral_deviation: f64,
    pub curvature_deviation: f64,
    pub velocity_deviation: f64,
    pub collision_risk: f64,
    pub collision_severity: f64,
    pub accel_violation: f64,
    pub total: f64,
}

impl CostBreakdown {
    pub fn terms(&self) -> [f64; 6] {
        [
            self.lateral_deviation,
            self.curvature_deviation,
            self.velocity_deviation,
            self.collision_risk,
            self.collision_severity,
            self.accel_violation,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
    pub kind: HorizonKind,
    pub n_end: f64,
    /// End speed offset relative to the profile [m/s].
    pub dv_end: f64,
    pub cost: CostBreakdown,
    pub verdicts: Verdicts,
}

impl Trajectory {
    pub fn duration(&self) -> f64 {
        self.samples.last().map_or(0.0, |p| p.t)
    }

    /// State at time `t`, clamped to the trajectory. Exact on sample times,
    /// linear in between.
    pub fn state_at(&self, t: f64) -> FrenetState {
        let (a, b, l) = self.bracket(t);
        let lerp = |x: f64, y: f64| x + l * (y - x);
        let (x, y) = (a.state, b.state);
        FrenetState {
            s: lerp(x.s, y.s),
            s_dot: lerp(x.s_dot, y.s_dot),
            s_ddot: lerp(x.s_ddot, y.s_ddot),
            n: lerp(x.n, y.n),
            n_dot: lerp(x.n_dot, y.n_dot),
            n_ddot: lerp(x.n_ddot, y.n_ddot),
        }
    }

    /// Samples around `t` and the interpolation weight of the second.
    fn bracket(&self, t: f64) -> (&TrajectorySample, &TrajectorySample, f64) {
        let k = self.samples.partition_point(|p| p.t <= t);
        if k == 0 {
            return (&self.samples[0], &self.samples[0], 0.0);
        }
        if k == self.samples.len() {
            return (&self.samples[k - 1], &self.samples[k - 1], 0.0);
        }
        let (a, b) = (&self.samples[k - 1], &self.samples[k]);
        if t == a.t {
            return (a, a, 0.0);
        }
        (a, b, (t - a.t) / (b.t - a.t))
    }

    /// Arclength of the slowest sample.
    pub fn min_speed_s(&self) -> f64 {
        self.samples
            .iter()
            .min_by(|a, b| a.v.total_cmp(&b.v))
            .map_or(f64::NAN, |p| p.state.s)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,s,n,x,y,z,v,ax_hat,ay_hat,kappa,cost_total\n");
        for p in &self.samples {
            let row = [p.t, p.state.s, p.state.n, p.x, p.y, p.z, p.v, p.ax_hat, p.ay_hat, p.kappa, self.cost.total];
            let cells: Vec<String> = row.iter().map(|&x| fmt9(x)).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }
}

/// Start of the next plan: the point of the previous plan `t_const` after
/// the sample closest to the vehicle's progress.
pub fn determine_start_state(prev: Option<&Trajectory>, estimated: &FrenetState, t_const: f64) -> FrenetState {
    match start_time_on(prev, estimated) {
        Some((prev, t)) => prev.state_at(t + t_const),
        None => *estimated,
    }
}

/// The previous plan and the time of its sample nearest to the vehicle,
/// unless the vehicle lies outside it.
fn start_time_on<'a>(prev: Option<&'a Trajectory>, estimated: &FrenetState) -> Option<(&'a Trajectory, f64)> {
    let prev = prev.filter(|p| !p.samples.is_empty())?;
    let first = prev.samples[0].state.s;
    let last = prev.samples[prev.samples.len() - 1].state.s;
    if estimated.s < first || estimated.s > last {
        return None;
    }
    let nearest = prev
        .samples
        .iter()
        .min_by(|a, b| (a.state.s - estimated.s).abs().total_cmp(&(b.state.s - estimated.s).abs()))
        .map_or(0.0, |p| p.t);
    Some((prev, nearest))
}

/// Everything the planner sees in one cycle.
#[derive(Debug, Clone, Copy)]
pub struct World<'a> {
    pub track: &'a Track3D,
    pub gg: &'a GgModel,
    pub grip: &'a GripMap,
    pub profile: &'a VelocityProfile,
    pub obstacles: &'a [Obstacle],
    pub state: FrenetState,
}

#[derive(Debug, Error, PartialEq)]
pub enum PlanError {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("invalid planner configuration: {0}")]
    Config(String),
    #[error("no candidate could be time-parametrized")]
    NoCandidates,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanOutcome {
    pub trajectory: Trajectory,
    /// True when no candidate passed every check and the fallback choice
    /// was returned.
    pub degraded: bool,
    pub start: FrenetState,
    pub candidates: usize,
    pub feasible: usize,
}

/// Candidates for a start state, already checked and scored.
pub fn evaluate_candidates(world: &World, start: &FrenetState, config: &PlannerConfig) -> Result<Vec<Trajectory>, PlanError> {
    let mut candidates = match config.mode {
        HorizonKind::Spatial => sample_spatial(&to_spatial(start)?, world.profile, world.track, config),
        HorizonKind::Temporal => sample_temporal(start, world.profile, world.track, config),
    };
    for c in &mut candidates {
        c.verdicts = check_feasibility(c, world.track, world.gg, world.grip, world.obstacles, config);
        c.cost = evaluate_cost(c, world, config);
    }
    Ok(candidates)
}

/// One planning cycle: start state, candidates, checks, costs, selection.
pub fn plan_step(world: &World, prev: Option<&Trajectory>, config: &PlannerConfig) -> Result<PlanOutcome, PlanError> {
    config.validate().map_err(PlanError::Config)?;
    let start = determine_start_state(prev, &world.state, config.t_const);
    let candidates = evaluate_candidates(world, &start, config)?;
    let total = candidates.len();
    let feasible = candidates.iter().filter(|c| c.verdicts.feasible).count();
    let tie_break = |a: &Trajectory, b: &Trajectory| {
        a.n_end.abs().total_cmp(&b.n_end.abs()).then(a.dv_end.abs().total_cmp(&b.dv_end.abs()))
    };
    let best = if feasible > 0 {
        candidates
            .into_iter()
            .filter(|c| c.verdicts.feasible)
            .min_by(|a, b| a.cost.total.total_cmp(&b.cost.total).then_with(|| tie_break(a, b)))
    } else {
        let brake = config.fallback == Fallback::Brake;
        candidates.into_iter().min_by(|a, b| {
            let (va, vb) = (&a.verdicts, &b.verdicts);
            va.hard_severity()
                .total_cmp(&vb.hard_severity())
                .then(if brake { a.dv_end.total_cmp(&b.dv_end) } else { std::cmp::Ordering::Equal })
                .then(va.gg_excess_integral.total_cmp(&vb.gg_excess_integral))
                .then(a.cost.total.total_cmp(&b.cost.total))
                .then_with(|| tie_break(a, b))
        })
    };
    let trajectory = best.ok_or(PlanError::NoCandidates)?;
    Ok(PlanOutcome { trajectory, degraded: feasible == 0, start, candidates: total, feasible })
}
