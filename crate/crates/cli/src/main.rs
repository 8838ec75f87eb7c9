//! `velplan` command-line front end.
//!
//! Every command writes plot-ready CSV or JSON with nine significant
//! digits. Exit codes: 0 on success, 1 on other failures, 2 for missing or
//! invalid input, 3 when the vehicle or the speed solver stalls.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use velplan::apex::ApexSearchConfig;
use velplan::ggcon::{GGMap, GgModel};
use velplan::grip::GripMap;
use velplan::planner::{evaluate_candidates, plan_step, World};
use velplan::sim::{
    offline_profile, run_scenario, runtime_report, sector_time, ProfileMode, Scenario, SimError, SimLog, StepRecord,
    StopReason, SyntheticTrack, TrackKind,
};
use velplan::track3d::Track3D;
use velplan::velprofile::{fmt9, generate_profile, ProfileError};

#[derive(Parser)]
#[command(name = "velplan", version, about = "Velocity profiles and local trajectory planning on 3D race tracks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the feasible speed profile over a horizon.
    Profile(ProfileArgs),
    /// Run one planning cycle from a scenario's start state.
    Plan(PlanArgs),
    /// Run a scenario in closed loop and write its logs.
    Simulate(SimulateArgs),
    /// Write a synthetic track.
    GenTrack(GenTrackArgs),
    /// Summarize a simulation log.
    Report(ReportArgs),
}

#[derive(Args)]
struct ProfileArgs {
    /// Track CSV.
    #[arg(long)]
    track: PathBuf,
    /// Gridded gg-diagrams; the analytic model is used otherwise.
    #[arg(long)]
    gg: Option<PathBuf>,
    /// Uniform grip scaling in (0, 1].
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Grip zone `FROM:TO:ALPHA`, repeatable; later zones win.
    #[arg(long = "zone", value_name = "FROM:TO:ALPHA")]
    zones: Vec<String>,
    #[arg(long, default_value_t = 0.0)]
    s_start: f64,
    /// Speed at `s_start`; defaults to the track's offline speed there.
    #[arg(long)]
    v_start: Option<f64>,
    #[arg(long, default_value_t = 80.0)]
    v_max: f64,
    /// Horizon length [m].
    #[arg(long)]
    h_opt: Option<f64>,
    /// Grid step [m].
    #[arg(long)]
    ds: Option<f64>,
    /// Output CSV; stdout when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario TOML.
    #[arg(long)]
    scenario: PathBuf,
    /// Override a scenario setting, as in `planner.s_horizon=150`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct PlanArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Selected trajectory CSV; stdout when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Also write every candidate as CSV.
    #[arg(long)]
    candidates: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Output directory, created if missing.
    #[arg(short, long)]
    out: PathBuf,
    /// Keep wall-clock timings in the step log.
    #[arg(long)]
    timing: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Straight,
    Circle,
    BankedArc,
    Chicane,
    ShortChicane,
}

#[derive(Args)]
struct GenTrackArgs {
    kind: Kind,
    /// Track parameter, as in `r1=40`, `half_width=8` or `bank.amplitude=0.1`.
    /// Angles are in radians.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    params: Vec<String>,
    /// Gridded gg-diagrams used to solve the offline speed.
    #[arg(long)]
    gg: Option<PathBuf>,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Step log written by `simulate`.
    #[arg(long)]
    log: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    step_period: f64,
    /// Sector `FROM:TO` to time.
    #[arg(long, value_name = "FROM:TO")]
    sector: Option<String>,
}

/// A failed command with its exit code.
struct Failure {
    code: u8,
    message: String,
}

fn input(message: impl ToString) -> Failure {
    Failure { code: 2, message: message.to_string() }
}

fn runtime(message: impl ToString) -> Failure {
    Failure { code: 1, message: message.to_string() }
}

fn profile_failure(e: ProfileError) -> Failure {
    match e {
        ProfileError::Stall(_) => Failure { code: 3, message: e.to_string() },
        ProfileError::Invalid(_) => input(e),
        _ => runtime(e),
    }
}

fn sim_failure(e: SimError) -> Failure {
    match e {
        SimError::Stall { .. } | SimError::Profile { source: ProfileError::Stall(_), .. } => {
            Failure { code: 3, message: e.to_string() }
        }
        _ => runtime(e),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Profile(a) => cmd_profile(a),
        Command::Plan(a) => cmd_plan(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::GenTrack(a) => cmd_gen_track(a),
        Command::Report(a) => cmd_report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn write_output(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| runtime(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_gg(path: Option<&Path>) -> Result<GgModel, Failure> {
    match path {
        Some(p) => Ok(GgModel::from(GGMap::load(p).map_err(|e| input(format!("gg-diagram {}: {e}", p.display())))?)),
        None => Ok(GgModel::default()),
    }
}

fn parse_floats(text: &str, count: usize, what: &str) -> Result<Vec<f64>, Failure> {
    let parts: Result<Vec<f64>, _> = text.split(':').map(str::parse).collect();
    match parts {
        Ok(v) if v.len() == count => Ok(v),
        _ => Err(input(format!("{what}: expected {count} numbers separated by ':', got {text:?}"))),
    }
}

fn cmd_profile(a: ProfileArgs) -> Result<(), Failure> {
    let track = Track3D::load(&a.track).map_err(|e| input(format!("track {}: {e}", a.track.display())))?;
    let gg = load_gg(a.gg.as_deref())?;
    let mut grip = GripMap::uniform(a.alpha);
    for z in &a.zones {
        let v = parse_floats(z, 3, "zone")?;
        grip = grip.with_zone(v[0], v[1], v[2]);
    }
    let defaults = ApexSearchConfig::default();
    let config = ApexSearchConfig { h_opt: a.h_opt.unwrap_or(defaults.h_opt), ds: a.ds.unwrap_or(defaults.ds), ..defaults };
    let v_start = a.v_start.unwrap_or_else(|| track.sample(a.s_start).v_off);
    let profile = generate_profile(&track, &gg, &grip, v_start, a.v_max, a.s_start, &config).map_err(profile_failure)?;
    write_output(a.output.as_deref(), &profile.to_csv())
}

fn load_scenario(a: &ScenarioArgs) -> Result<Scenario, Failure> {
    let mut scenario = Scenario::load(&a.scenario).map_err(input)?;
    for kv in &a.overrides {
        let (key, value) = kv.split_once('=').ok_or_else(|| input(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        scenario.apply_override(key.trim(), value.trim()).map_err(input)?;
    }
    Ok(scenario)
}

fn cmd_plan(a: PlanArgs) -> Result<(), Failure> {
    let scenario = load_scenario(&a.scenario)?;
    let profile = match scenario.profile_mode {
        ProfileMode::Offline | ProfileMode::RaceLine => offline_profile(&scenario),
        ProfileMode::Online => generate_profile(
            &scenario.track,
            &scenario.gg,
            &scenario.grip,
            scenario.start.s_dot,
            scenario.v_max,
            scenario.start.s,
            &scenario.profile,
        ),
    }
    .map_err(profile_failure)?;
    let world = World {
        track: &scenario.track,
        gg: &scenario.gg,
        grip: &scenario.grip,
        profile: &profile,
        obstacles: &scenario.obstacles,
        state: scenario.start,
    };
    let outcome = plan_step(&world, None, &scenario.planner).map_err(runtime)?;
    if let Some(path) = &a.candidates {
        let all = evaluate_candidates(&world, &outcome.start, &scenario.planner).map_err(runtime)?;
        let mut out = String::from("candidate,feasible,t,s,n,v,cost_total\n");
        for (i, c) in all.iter().enumerate() {
            for p in &c.samples {
                let cells = [p.t, p.state.s, p.state.n, p.v, c.cost.total].map(fmt9).join(",");
                let _ = writeln!(out, "{i},{},{cells}", c.verdicts.feasible);
            }
        }
        write_output(Some(path), &out)?;
    }
    eprintln!(
        "candidates {} feasible {} degraded {} cost {}",
        outcome.candidates,
        outcome.feasible,
        outcome.degraded,
        fmt9(outcome.trajectory.cost.total)
    );
    write_output(a.output.as_deref(), &outcome.trajectory.to_csv())
}

/// Rounds every number in a JSON document to nine significant digits.
fn round9(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            n.as_f64().and_then(|x| fmt9(x).parse::<f64>().ok()).map_or(Value::Null, |x| json!(x))
        }
        Value::Array(a) => Value::Array(a.into_iter().map(round9).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, round9(v))).collect()),
        other => other,
    }
}

fn pretty(v: Value) -> String {
    serde_json::to_string_pretty(&round9(v)).unwrap_or_default() + "\n"
}

fn ndjson(log: &SimLog, timing: bool) -> String {
    let mut out = String::new();
    for line in log.to_ndjson(timing).lines() {
        let v: Value = serde_json::from_str(line).unwrap_or(Value::Null);
        out.push_str(&serde_json::to_string(&round9(v)).unwrap_or_default());
        out.push('\n');
    }
    out
}

/// Deterministic summary of one run.
fn run_summary(log: &SimLog, scenario: &Scenario) -> Value {
    let clearance = log.records.iter().filter_map(|r| r.clearance).fold(f64::INFINITY, f64::min);
    let sector = scenario.sector.map(|s| sector_time(log, s.s_from, s.s_to).ok());
    json!({
        "steps": log.records.len(),
        "stop": log.stop,
        "final_time": log.final_time,
        "final_s": log.final_state.s,
        "final_speed": log.final_state.s_dot,
        "degraded_steps": log.degraded_steps(),
        "gg_violation_steps": log.gg_violation_steps(),
        "collision_free": log.collision_free(),
        "min_clearance": clearance.is_finite().then_some(clearance),
        "sector_time": sector.flatten(),
    })
}

fn write_file(dir: &Path, name: &str, text: &str) -> Result<(), Failure> {
    write_output(Some(&dir.join(name)), text)
}

fn cmd_simulate(a: SimulateArgs) -> Result<(), Failure> {
    let scenario = load_scenario(&a.scenario)?;
    std::fs::create_dir_all(&a.out).map_err(|e| runtime(format!("cannot create {}: {e}", a.out.display())))?;
    let mut runs = vec![("", scenario.clone())];
    if scenario.compare_offline && scenario.profile_mode == ProfileMode::Online {
        let mut offline = scenario.clone();
        offline.profile_mode = ProfileMode::Offline;
        runs.push(("offline_", offline));
    }
    let mut summary = serde_json::Map::new();
    let mut runtimes = serde_json::Map::new();
    for (prefix, sc) in &runs {
        let log = run_scenario(sc).map_err(sim_failure)?;
        write_file(&a.out, &format!("{prefix}log.ndjson"), &ndjson(&log, a.timing))?;
        write_file(&a.out, &format!("{prefix}states.csv"), &log.states_csv())?;
        let label = if prefix.is_empty() { mode_name(sc.profile_mode) } else { "offline" };
        summary.insert(label.into(), run_summary(&log, sc));
        runtimes.insert(label.into(), serde_json::to_value(runtime_report(&log, sc.step_period)).unwrap_or_default());
    }
    if let (Some(on), Some(off)) = (summary.get("online"), summary.get("offline")) {
        if let (Some(a), Some(b)) = (on["sector_time"].as_f64(), off["sector_time"].as_f64()) {
            summary.insert("time_gap".into(), json!(b - a));
        }
    }
    let summary = pretty(Value::Object(summary));
    write_file(&a.out, "summary.json", &summary)?;
    let runtimes = pretty(Value::Object(runtimes));
    write_file(&a.out, "runtime.json", &runtimes)?;
    print!("{summary}");
    eprint!("{runtimes}");
    Ok(())
}

fn mode_name(mode: ProfileMode) -> &'static str {
    match mode {
        ProfileMode::Online => "online",
        ProfileMode::Offline => "offline",
        ProfileMode::RaceLine => "race-line",
    }
}

fn default_kind(kind: Kind) -> TrackKind {
    match kind {
        Kind::Straight => TrackKind::Straight { length: 600.0 },
        Kind::Circle => TrackKind::Circle { radius: 100.0 },
        Kind::BankedArc => TrackKind::BankedArc { radius: 100.0, bank_angle: 15f64.to_radians(), length: 300.0 },
        Kind::Chicane => TrackKind::chicane(),
        Kind::ShortChicane => TrackKind::short_chicane(),
    }
}

fn cmd_gen_track(a: GenTrackArgs) -> Result<(), Failure> {
    let base = SyntheticTrack::new(default_kind(a.kind));
    let mut table = toml::Table::try_from(&base).map_err(runtime)?;
    for kv in &a.params {
        let (key, value) = kv.split_once('=').ok_or_else(|| input(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        let value: toml::Value = value.trim().parse::<f64>().map(toml::Value::Float).map_err(|_| {
            input(format!("{key}: expected a number, got {value:?}"))
        })?;
        let mut parts: Vec<&str> = key.trim().split('.').collect();
        if !table.contains_key(parts[0]) && !matches!(parts[0], "slope" | "bank") {
            return Err(input(format!("unknown track parameter {key:?}")));
        }
        let mut slot = &mut table;
        let last = parts.pop().unwrap_or_default();
        for part in parts {
            slot = slot
                .entry(part)
                .or_insert_with(|| toml::Value::Table(toml::Table::new()))
                .as_table_mut()
                .ok_or_else(|| input(format!("{key}: {part} is not a table")))?;
        }
        slot.insert(last.into(), value);
    }
    let spec: SyntheticTrack = table.try_into().map_err(|e: toml::de::Error| input(format!("track parameters: {e}")))?;
    spec.validate().map_err(input)?;
    let gg = load_gg(a.gg.as_deref())?;
    let track = spec.build(&gg).map_err(runtime)?;
    write_output(Some(&a.output), &track.to_csv_fixed())
}

fn cmd_report(a: ReportArgs) -> Result<(), Failure> {
    let text = std::fs::read_to_string(&a.log).map_err(|e| input(format!("cannot read {}: {e}", a.log.display())))?;
    let records: Vec<StepRecord> = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| input(format!("{}:{}: {e}", a.log.display(), i + 1))))
        .collect::<Result<_, _>>()?;
    let last = records.last().ok_or_else(|| input(format!("{} holds no steps", a.log.display())))?;
    let log = SimLog { final_state: last.state, final_time: last.t, stop: StopReason::MaxSteps, records: records.clone() };
    let sector = match &a.sector {
        Some(s) => {
            let v = parse_floats(s, 2, "sector")?;
            Some(sector_time(&log, v[0], v[1]).map_err(input)?)
        }
        None => None,
    };
    let clearance = log.records.iter().filter_map(|r| r.clearance).fold(f64::INFINITY, f64::min);
    let timed = log.records.iter().any(|r| r.timing.is_some());
    let report = json!({
        "steps": log.records.len(),
        "degraded_steps": log.degraded_steps(),
        "gg_violation_steps": log.gg_violation_steps(),
        "collision_free": log.collision_free(),
        "min_clearance": clearance.is_finite().then_some(clearance),
        "sector_time": sector,
        "runtime": timed.then(|| runtime_report(&log, a.step_period)),
    });
    print!("{}", pretty(report));
    Ok(())
}
