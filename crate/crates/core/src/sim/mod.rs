//! Closed-loop simulation with perfect tracking.

mod run;
mod scenario;
mod tracks;

pub use run::{
    offline_profile, run_scenario, runtime_report, sector_time, NotCrossed, PhaseStats, ProfileSnapshot,
    RuntimeReport, SimError, SimLog, StepRecord, StepTiming, StopReason, STALL_SPEED, STALL_STEPS,
};
pub use scenario::{ProfileMode, Scenario, ScenarioError, Sector, StopCondition};
pub use tracks::{generate_synthetic_track, Bump, SyntheticTrack, TrackKind, MIN_OFFLINE_SPEED};
