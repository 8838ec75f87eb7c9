use std::path::PathBuf;
use std::process::{Command, Output};

fn repo(rel: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel).to_string_lossy().into_owned()
}

fn velplan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_velplan")).args(args).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn missing_scenario_is_an_input_error() {
    let out = velplan(&["plan", "--scenario", "does/not/exist.toml"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn bad_override_is_an_input_error() {
    let out = velplan(&["plan", "--scenario", &repo("scenarios/obstacle.toml"), "--set", "no_such_key=1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn profile_output_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let path = dir.path().join(name);
        let out = velplan(&["profile", "--track", &repo("tracks/chicane.csv"), "--alpha", "0.8", "-o", path.to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        std::fs::read_to_string(path).unwrap()
    };
    let a = run("a.csv");
    assert_eq!(a, run("b.csv"));
    assert!(a.starts_with("s,"));
}

#[test]
fn straight_track_profile_sits_on_top_speed() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.csv");
    let out = velplan(&[
        "profile",
        "--track",
        &repo("tracks/straight.csv"),
        "--v-start",
        "45",
        "--v-max",
        "45",
        "-o",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "v").unwrap();
    for line in lines {
        let v: f64 = line.split(',').nth(col).unwrap().parse().unwrap();
        assert_eq!(v, 45.0);
    }
}

#[test]
fn reduced_grip_summary_shows_the_online_gain() {
    let dir = tempfile::tempdir().unwrap();
    let out = velplan(&["simulate", "--scenario", &repo("scenarios/reduced_grip.toml"), "-o", dir.path().to_str().unwrap()]);
    let summary = stdout_json(&out);
    assert!(summary["time_gap"].as_f64().unwrap() > 0.0);
    assert_eq!(summary["online"]["degraded_steps"], 0);
    for file in ["log.ndjson", "states.csv", "offline_log.ndjson", "offline_states.csv", "summary.json"] {
        assert!(dir.path().join(file).exists(), "{file}");
    }
}

#[test]
fn obstacle_run_is_collision_free() {
    let dir = tempfile::tempdir().unwrap();
    let out = velplan(&["simulate", "--scenario", &repo("scenarios/obstacle.toml"), "-o", dir.path().to_str().unwrap()]);
    let summary = stdout_json(&out);
    assert_eq!(summary["online"]["collision_free"], true);
    assert_eq!(summary["online"]["gg_violation_steps"], 0);
}

#[test]
fn plan_writes_trajectory_and_candidates() {
    let dir = tempfile::tempdir().unwrap();
    let traj = dir.path().join("traj.csv");
    let cands = dir.path().join("cands.csv");
    let out = velplan(&[
        "plan",
        "--scenario",
        &repo("scenarios/apex_alignment.toml"),
        "-o",
        traj.to_str().unwrap(),
        "--candidates",
        cands.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(std::fs::read_to_string(traj).unwrap().lines().count() > 10);
    assert!(std::fs::read_to_string(cands).unwrap().lines().count() > 10);
}

#[test]
fn gen_track_round_trips_through_profile() {
    let dir = tempfile::tempdir().unwrap();
    let track = dir.path().join("arc.csv");
    let out = velplan(&["gen-track", "banked-arc", "--set", "radius=80", "-o", track.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let profile = dir.path().join("p.csv");
    let out = velplan(&["profile", "--track", track.to_str().unwrap(), "-o", profile.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let out = velplan(&["gen-track", "circle", "--set", "wobble=3", "-o", track.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn report_reads_a_log() {
    let dir = tempfile::tempdir().unwrap();
    let out = velplan(&["simulate", "--scenario", &repo("scenarios/obstacle.toml"), "-o", dir.path().to_str().unwrap(), "--timing"]);
    assert!(out.status.success());
    let log = dir.path().join("log.ndjson");
    let report = stdout_json(&velplan(&["report", "--log", log.to_str().unwrap(), "--sector", "50:450"]));
    assert!(report.is_object());
}
