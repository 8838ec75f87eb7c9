//! The closed loop: profile, plan, advance, log.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::scenario::{ProfileMode, Scenario};
use crate::apex::ApexSearchConfig;
use crate::grip::GripMap;
use crate::planner::{obstacle_distance, plan_step, CostBreakdown, FrenetState, PlanError, Trajectory, Verdicts, World};
use crate::velprofile::{generate_profile, ProfileError, VelocityProfile};

/// Speed below which a step counts towards a stall [m/s].
pub const STALL_SPEED: f64 = 0.1;
/// Consecutive slow steps that abort a run.
pub const STALL_STEPS: usize = 50;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("profile generation failed at step {step}: {source}")]
    Profile { step: usize, source: ProfileError },
    #[error("planning failed at step {step}: {source}")]
    Plan { step: usize, source: PlanError },
    #[error("vehicle stalled at s = {s:.3} m after {step} steps (speed below {STALL_SPEED} m/s for {STALL_STEPS} steps)")]
    Stall { step: usize, s: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepTiming {
    pub profile_ms: f64,
    pub planning_ms: f64,
}

/// Summary of the profile snapshot a step planned against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileSnapshot {
    /// Step that generated the snapshot; offline runs reuse snapshot 0.
    pub id: usize,
    pub v_here: f64,
    pub apexes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub t: f64,
    /// Executed state at the start of the step.
    pub state: FrenetState,
    /// Start state of the plan.
    pub plan_start: FrenetState,
    pub n_end: f64,
    pub dv_end: f64,
    pub cost: CostBreakdown,
    pub verdicts: Verdicts,
    pub degraded: bool,
    pub candidates: usize,
    pub feasible: usize,
    pub profile: ProfileSnapshot,
    /// Clearance of the executed footprint to the nearest obstacle [m].
    pub clearance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub timing: Option<StepTiming>,
    #[serde(skip)]
    pub trajectory: Option<Trajectory>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Goal,
    MaxSteps,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimLog {
    pub records: Vec<StepRecord>,
    /// Executed state after the last step.
    pub final_state: FrenetState,
    pub final_time: f64,
    pub stop: StopReason,
}

impl SimLog {
    /// Executed `(t, state)` pairs including the final state.
    pub fn states(&self) -> Vec<(f64, FrenetState)> {
        let mut out: Vec<(f64, FrenetState)> = self.records.iter().map(|r| (r.t, r.state)).collect();
        out.push((self.final_time, self.final_state));
        out
    }

    /// Steps where no candidate passed every check.
    pub fn degraded_steps(&self) -> usize {
        self.records.iter().filter(|r| r.degraded).count()
    }

    /// Steps whose selected plan exceeded the gg slack.
    pub fn gg_violation_steps(&self) -> usize {
        self.records.iter().filter(|r| !r.verdicts.gg_ok).count()
    }

    pub fn collision_free(&self) -> bool {
        self.records.iter().all(|r| r.clearance.is_none_or(|c| c > 0.0) && r.verdicts.collision_free)
    }

    /// One JSON object per step. Wall-clock fields are left out unless
    /// asked for, so logs of identical runs are byte-identical.
    pub fn to_ndjson(&self, with_timing: bool) -> String {
        let mut out = String::new();
        for r in &self.records {
            let mut r = r.clone();
            if !with_timing {
                r.timing = None;
            }
            out.push_str(&serde_json::to_string(&r).unwrap_or_default());
            out.push('\n');
        }
        out
    }

    /// Executed states as CSV `t,s,n,s_dot,s_ddot`.
    pub fn states_csv(&self) -> String {
        use crate::velprofile::fmt9;
        let mut out = String::from("t,s,n,s_dot,s_ddot\n");
        for (t, x) in self.states() {
            out.push_str(&format!("{},{},{},{},{}\n", fmt9(t), fmt9(x.s), fmt9(x.n), fmt9(x.s_dot), fmt9(x.s_ddot)));
        }
        out
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("the run never crossed s = {0}")]
pub struct NotCrossed(pub f64);

/// Time between crossing `s_from` and `s_to`, interpolating linearly
/// between executed states.
pub fn sector_time(log: &SimLog, s_from: f64, s_to: f64) -> Result<f64, NotCrossed> {
    let states = log.states();
    let crossing = |target: f64| {
        states
            .windows(2)
            .find(|w| w[0].1.s <= target && w[1].1.s >= target && w[1].1.s > w[0].1.s)
            .map(|w| {
                let l = (target - w[0].1.s) / (w[1].1.s - w[0].1.s);
                w[0].0 + l * (w[1].0 - w[0].0)
            })
            .ok_or(NotCrossed(target))
    };
    Ok(crossing(s_to)? - crossing(s_from)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PhaseStats {
    pub mean_ms: f64,
    pub max_ms: f64,
}

impl PhaseStats {
    fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return PhaseStats::default();
        }
        PhaseStats {
            mean_ms: values.iter().sum::<f64>() / values.len() as f64,
            max_ms: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RuntimeReport {
    pub steps: usize,
    pub step_period_ms: f64,
    pub profile: PhaseStats,
    pub planning: PhaseStats,
    pub total: PhaseStats,
    /// Steps whose profile and planning time together exceeded the period.
    pub overruns: usize,
}

pub fn runtime_report(log: &SimLog, step_period: f64) -> RuntimeReport {
    let timings: Vec<StepTiming> = log.records.iter().filter_map(|r| r.timing).collect();
    let profile: Vec<f64> = timings.iter().map(|t| t.profile_ms).collect();
    let planning: Vec<f64> = timings.iter().map(|t| t.planning_ms).collect();
    let total: Vec<f64> = timings.iter().map(|t| t.profile_ms + t.planning_ms).collect();
    let period_ms = 1e3 * step_period;
    RuntimeReport {
        steps: log.records.len(),
        step_period_ms: period_ms,
        profile: PhaseStats::of(&profile),
        planning: PhaseStats::of(&planning),
        total: PhaseStats::of(&total),
        overruns: total.iter().filter(|&&t| t > period_ms).count(),
    }
}

fn ms_since(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

/// Profile frozen before an offline or race-line run: full grip, long
/// enough to cover the goal plus one planning horizon.
pub fn offline_profile(scenario: &Scenario) -> Result<VelocityProfile, ProfileError> {
    let reach = scenario.stop.s_goal.map_or(scenario.track.s_lap(), |g| g - scenario.start.s);
    let v_start = match scenario.profile_mode {
        ProfileMode::RaceLine => scenario.track.sample(scenario.start.s).v_off.min(scenario.v_max),
        _ => scenario.start.s_dot,
    };
    let config = ApexSearchConfig {
        h_opt: reach.max(0.0) + scenario.planner.s_horizon + scenario.profile.l,
        ..scenario.profile
    };
    generate_profile(
        &scenario.track,
        &scenario.gg,
        &GripMap::uniform(1.0),
        v_start,
        scenario.v_max,
        scenario.start.s,
        &config,
    )
}

/// Runs the closed loop. The executed state after each step is the
/// selected plan evaluated one step period after the vehicle's own state,
/// so with latency compensation the plan's time origin already lies
/// `t_const` ahead.
pub fn run_scenario(scenario: &Scenario) -> Result<SimLog, SimError> {
    let frozen = match scenario.profile_mode {
        ProfileMode::Offline | ProfileMode::RaceLine => {
            Some(offline_profile(scenario).map_err(|source| SimError::Profile { step: 0, source })?)
        }
        ProfileMode::Online => None,
    };
    let mut state = scenario.start;
    let mut prev: Option<Trajectory> = None;
    let mut records = Vec::new();
    let mut slow = 0;
    let mut stop = StopReason::MaxSteps;
    for step in 0..scenario.stop.max_steps {
        if scenario.stop.s_goal.is_some_and(|g| state.s >= g) {
            stop = StopReason::Goal;
            break;
        }
        let t = step as f64 * scenario.step_period;
        let clock = Instant::now();
        let online;
        let (profile, snapshot_id) = match &frozen {
            Some(p) => (p, 0),
            None => {
                online = generate_profile(
                    &scenario.track,
                    &scenario.gg,
                    &scenario.grip,
                    state.s_dot.max(0.0),
                    scenario.v_max,
                    state.s,
                    &scenario.profile,
                )
                .map_err(|source| SimError::Profile { step, source })?;
                (&online, step)
            }
        };
        let profile_ms = ms_since(clock);
        let world = World {
            track: &scenario.track,
            gg: &scenario.gg,
            grip: &scenario.grip,
            profile,
            obstacles: &scenario.obstacles,
            state,
        };
        let clock = Instant::now();
        let planner = if scenario.latency_compensation {
            scenario.planner
        } else {
            crate::planner::PlannerConfig { t_const: 0.0, ..scenario.planner }
        };
        let outcome = plan_step(&world, prev.as_ref(), &planner).map_err(|source| SimError::Plan { step, source })?;
        let planning_ms = ms_since(clock);
        let lead = if prev.is_some() { planner.t_const } else { 0.0 };
        let next = outcome.trajectory.state_at((scenario.step_period - lead).max(0.0));
        let clearance = (!scenario.obstacles.is_empty()).then(|| {
            scenario
                .obstacles
                .iter()
                .map(|o| obstacle_distance(&scenario.track, state.s, state.n, o, &planner))
                .fold(f64::INFINITY, f64::min)
        });
        records.push(StepRecord {
            step,
            t,
            state,
            plan_start: outcome.start,
            n_end: outcome.trajectory.n_end,
            dv_end: outcome.trajectory.dv_end,
            cost: outcome.trajectory.cost,
            verdicts: outcome.trajectory.verdicts,
            degraded: outcome.degraded,
            candidates: outcome.candidates,
            feasible: outcome.feasible,
            profile: ProfileSnapshot { id: snapshot_id, v_here: profile.at_s(state.s).v, apexes: profile.apexes.len() },
            clearance,
            timing: Some(StepTiming { profile_ms, planning_ms }),
            trajectory: Some(outcome.trajectory.clone()),
        });
        slow = if next.s_dot < STALL_SPEED { slow + 1 } else { 0 };
        if slow >= STALL_STEPS {
            return Err(SimError::Stall { step, s: next.s });
        }
        state = next;
        prev = Some(outcome.trajectory);
    }
    if scenario.stop.s_goal.is_some_and(|g| state.s >= g) {
        stop = StopReason::Goal;
    }
    let final_time = records.len() as f64 * scenario.step_period;
    Ok(SimLog { records, final_state: state, final_time, stop })
}
