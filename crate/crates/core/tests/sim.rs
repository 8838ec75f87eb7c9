use std::path::PathBuf;

use velplan::ggcon::GgModel;
use velplan::planner::FrenetState;
use velplan::sim::{run_scenario, sector_time, ProfileMode, Scenario, StopReason, SyntheticTrack, TrackKind};

fn straight(length: f64, speed: f64) -> Scenario {
    let track = SyntheticTrack::new(TrackKind::Straight { length }).build(&GgModel::default()).unwrap();
    let start = FrenetState { s: 0.0, s_dot: speed, ..Default::default() };
    let mut sc = Scenario::new(track, start, speed);
    sc.stop.s_goal = Some(length - 50.0);
    sc
}

fn bundled(name: &str) -> Scenario {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(format!("{name}.toml"));
    Scenario::load(path).unwrap()
}

#[test]
fn runs_are_deterministic() {
    let sc = bundled("obstacle");
    let a = run_scenario(&sc).unwrap();
    let b = run_scenario(&sc).unwrap();
    assert_eq!(a.to_ndjson(false), b.to_ndjson(false));
    assert_eq!(a.final_state, b.final_state);
}

#[test]
fn the_vehicle_follows_each_plan_exactly() {
    let sc = bundled("reduced_grip");
    let log = run_scenario(&sc).unwrap();
    for (k, pair) in log.records.windows(2).enumerate() {
        let plan = pair[0].trajectory.as_ref().unwrap();
        let lead = if k == 0 { 0.0 } else { sc.planner.t_const };
        let expected = plan.state_at(sc.step_period - lead);
        assert_eq!(pair[1].state, expected, "step {}", k + 1);
    }
}

#[test]
fn constant_speed_sector_time() {
    let mut sc = straight(700.0, 50.0);
    sc.stop.s_goal = Some(660.0);
    let log = run_scenario(&sc).unwrap();
    let t = sector_time(&log, 50.0, 650.0).unwrap();
    assert!((t - 12.0).abs() < 1e-9, "{t}");
}

#[test]
fn straight_track_at_top_speed_is_left_alone() {
    let sc = straight(600.0, 60.0);
    let log = run_scenario(&sc).unwrap();
    assert_eq!(log.stop, StopReason::Goal);
    assert_eq!(log.degraded_steps(), 0);
    for r in &log.records {
        assert!(r.state.n.abs() < 1e-12 && (r.state.s_dot - 60.0).abs() < 1e-9, "step {}", r.step);
        assert!(r.cost.total.abs() < 1e-9);
        assert_eq!((r.n_end, r.dv_end), (0.0, 0.0));
    }
    for pair in log.records.windows(2) {
        assert!((pair[1].state.s - pair[0].state.s - 6.0).abs() < 1e-9);
    }
}

#[test]
fn offline_runs_plan_against_one_profile() {
    let mut sc = bundled("reduced_grip");
    sc.profile_mode = ProfileMode::Offline;
    sc.stop.max_steps = 30;
    let log = run_scenario(&sc).unwrap();
    assert!(log.records.iter().all(|r| r.profile.id == 0));
}

#[test]
fn max_steps_stops_the_run() {
    let mut sc = straight(2000.0, 40.0);
    sc.stop = velplan::sim::StopCondition { s_goal: None, max_steps: 25 };
    let log = run_scenario(&sc).unwrap();
    assert_eq!(log.records.len(), 25);
    assert!((log.final_time - 2.5).abs() < 1e-12);
}
