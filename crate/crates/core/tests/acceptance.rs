//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any fails.

use std::path::PathBuf;
use std::time::Instant;

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

use velplan::apex::{admissible_velocity, ApexSearchConfig};
use velplan::ggcon::{AnalyticGg, GgModel};
use velplan::grip::GripMap;
use velplan::planner::{
    evaluate_candidates, plan_step, to_spatial, to_temporal, FrenetState, HorizonKind, Obstacle, PlannerConfig,
    Weights, World,
};
use velplan::pointmass::{build_horizon, RoadPoint};
use velplan::sim::{
    offline_profile, run_scenario, sector_time, ProfileMode, Scenario, StopReason, SyntheticTrack, TrackKind,
};
use velplan::track3d::Track3D;
use velplan::velprofile::{generate_profile, max_violation, VelocityProfile};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn repo(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn scenario(name: &str) -> Scenario {
    Scenario::load(repo(&format!("scenarios/{name}.toml"))).expect("bundled scenario loads")
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// 1. Apex admissible speed scales with the square root of the grip.
fn sqrt_alpha_law() -> Outcome {
    let clock = Instant::now();
    let track = SyntheticTrack::new(TrackKind::Circle { radius: 100.0 }).geometry().map_err(|e| e.to_string())?;
    let gg = GgModel::analytic(AnalyticGg::constant(12.0, 12.0, 14.0, 1.5));
    let cfg = ApexSearchConfig::default();
    let speed = |alpha: f64| admissible_velocity(&track, 50.0, &gg, alpha, 60.0, &cfg).speed().unwrap_or(f64::NAN);
    let v1 = speed(1.0);
    let worst = [0.49, 0.7, 0.9].iter().map(|&a| (speed(a) - a.sqrt() * v1).abs()).fold(0.0, f64::max);
    let secs = clock.elapsed().as_secs_f64();
    check(worst < 1e-6 && secs < 1.0, format!("max |V(a) - sqrt(a) V(1)| = {worst:.2e} m/s, {secs:.3} s"))
}

/// Pointwise highest speed of any trajectory on the speed lattice that
/// starts at `v_start` and keeps every interval inside the gg-diagram.
fn lattice_oracle(points: &[RoadPoint], gg: &GgModel, ds: f64, v_start: f64, v_max: f64, dv: f64) -> Vec<f64> {
    let levels = (v_max / dv).floor() as usize + 1;
    let speed = |k: usize| k as f64 * dv;
    let lateral: Vec<Vec<bool>> =
        points.iter().map(|p| (0..levels).map(|k| p.laterally_feasible(gg, speed(k))).collect()).collect();
    // Lattice speeds one interval later, rounded to the nearest level.
    let reach = |i: usize, k: usize| -> Option<(usize, usize)> {
        let p = &points[i];
        let v = speed(k);
        let lo = (v * v + 2.0 * ds * p.backward_hat(gg, v)).max(0.0).sqrt();
        let hi = (v * v + 2.0 * ds * p.forward_hat(gg, v)).max(0.0).sqrt().min(v_max);
        let a = ((lo / dv) - 0.5).ceil().max(0.0) as usize;
        let b = ((hi / dv) + 0.5).floor().min((levels - 1) as f64) as usize;
        (a <= b).then_some((a, b))
    };
    let n = points.len();
    let mut fwd = vec![vec![false; levels]; n];
    fwd[0][(v_start / dv).round() as usize] = true;
    for i in 0..n - 1 {
        let mut diff = vec![0i32; levels + 1];
        for k in 0..levels {
            if fwd[i][k] && lateral[i][k] {
                if let Some((a, b)) = reach(i, k) {
                    diff[a] += 1;
                    diff[b + 1] -= 1;
                }
            }
        }
        let mut run = 0;
        for k in 0..levels {
            run += diff[k];
            fwd[i + 1][k] = run > 0 && lateral[i + 1][k];
        }
    }
    let mut bwd = vec![vec![false; levels]; n];
    bwd[n - 1] = lateral[n - 1].clone();
    for i in (0..n - 1).rev() {
        let mut prefix = vec![0usize; levels + 1];
        for k in 0..levels {
            prefix[k + 1] = prefix[k] + bwd[i + 1][k] as usize;
        }
        for k in 0..levels {
            bwd[i][k] = lateral[i][k] && reach(i, k).is_some_and(|(a, b)| prefix[b + 1] > prefix[a]);
        }
    }
    (0..n).map(|i| (0..levels).rev().find(|&k| fwd[i][k] && bwd[i][k]).map_or(0.0, speed)).collect()
}

/// 2. The forward-backward profile matches a brute-force lattice search.
fn fwbw_oracle() -> Outcome {
    let track = SyntheticTrack::new(TrackKind::short_chicane()).geometry().map_err(|e| e.to_string())?;
    let gg = GgModel::default();
    let (v_start, v_max, ds) = (50.0, 80.0, 1.0);
    let cfg = ApexSearchConfig { h_opt: track.s_lap(), ds, ..Default::default() };
    let profile = generate_profile(&track, &gg, &GripMap::default(), v_start, v_max, 0.0, &cfg).map_err(|e| e.to_string())?;
    let clock = Instant::now();
    let points = build_horizon(&track, &GripMap::default(), 0.0, cfg.h_opt, ds);
    let oracle = lattice_oracle(&points, &gg, ds, v_start, v_max, 0.05);
    let secs = clock.elapsed().as_secs_f64();
    let worst = profile.v.iter().zip(&oracle).map(|(v, o)| (v - o).abs() / o.max(1.0)).fold(0.0, f64::max);
    check(
        worst < 0.02 && secs < 30.0 && oracle.len() == profile.len(),
        format!("max relative gap {:.3}% over {} samples, oracle {secs:.2} s", 100.0 * worst, oracle.len()),
    )
}

/// Every profile a scenario plans against.
fn scenario_profiles(sc: &Scenario) -> Result<Vec<VelocityProfile>, String> {
    if sc.profile_mode != ProfileMode::Online {
        return Ok(vec![offline_profile(sc).map_err(|e| e.to_string())?]);
    }
    let log = run_scenario(sc).map_err(|e| e.to_string())?;
    log.records
        .iter()
        .map(|r| {
            generate_profile(&sc.track, &sc.gg, &sc.grip, r.state.s_dot.max(0.0), sc.v_max, r.state.s, &sc.profile)
                .map_err(|e| e.to_string())
        })
        .collect()
}

/// 3. Every generated profile respects the gg-diagram.
fn profile_feasibility() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for name in ["reduced_grip", "obstacle", "apex_alignment"] {
        let mut sc = scenario(name);
        let mut runs = vec![sc.clone()];
        if sc.compare_offline {
            sc.profile_mode = ProfileMode::Offline;
            runs.push(sc);
        }
        for run in &runs {
            for p in scenario_profiles(run)? {
                worst = worst.max(max_violation(&run.track, &run.gg, &p));
                count += 1;
            }
        }
    }
    check(worst < 1e-6, format!("{count} profiles, worst violation {worst:.2e}"))
}

/// 4. Less grip never allows more speed, and strictly less at apexes.
fn alpha_monotonicity() -> Outcome {
    let track = Track3D::load(repo("tracks/chicane.csv")).map_err(|e| e.to_string())?;
    let gg = GgModel::default();
    let cfg = ApexSearchConfig::default();
    let run = |alpha: f64| generate_profile(&track, &gg, &GripMap::uniform(alpha), 60.0, 80.0, 0.0, &cfg);
    let (full, low) = (run(1.0).map_err(|e| e.to_string())?, run(0.7).map_err(|e| e.to_string())?);
    let above = full.v.iter().zip(&low.v).filter(|(f, l)| **l > **f + 1e-9).count();
    let strict = full.apexes.iter().all(|a| low.at_s(a.s_apex).v < full.at_s(a.s_apex).v);
    check(
        above == 0 && strict && !full.apexes.is_empty(),
        format!("{above} samples above the full-grip profile, strict at {} apexes: {strict}", full.apexes.len()),
    )
}

/// 5. The online profile beats the frozen full-grip one under low grip.
fn reduced_grip() -> Outcome {
    let online = scenario("reduced_grip");
    let sector = online.sector.ok_or("scenario has no sector")?;
    let mut offline = online.clone();
    offline.profile_mode = ProfileMode::Offline;
    let on = run_scenario(&online).map_err(|e| e.to_string())?;
    let off = run_scenario(&offline).map_err(|e| e.to_string())?;
    let t_on = sector_time(&on, sector.s_from, sector.s_to).map_err(|e| e.to_string())?;
    let t_off = sector_time(&off, sector.s_from, sector.s_to).map_err(|e| e.to_string())?;
    check(
        t_on < t_off && on.degraded_steps() == 0 && off.degraded_steps() >= 1,
        format!(
            "online {t_on:.3} s ({} degraded), offline {t_off:.3} s ({} degraded), gap {:.3} s",
            on.degraded_steps(),
            off.degraded_steps(),
            t_off - t_on
        ),
    )
}

/// 6. Spatial plans put their slowest point on the apex, temporal ones do not.
fn apex_alignment() -> Outcome {
    let sc = scenario("apex_alignment");
    let profile = offline_profile(&sc).map_err(|e| e.to_string())?;
    let below = profile.at_s(sc.start.s).v - sc.start.s_dot;
    let apex = profile.apexes.first().ok_or("no apex ahead")?.s_apex;
    let world = World {
        track: &sc.track,
        gg: &sc.gg,
        grip: &sc.grip,
        profile: &profile,
        obstacles: &sc.obstacles,
        state: sc.start,
    };
    let slowest = |mode: HorizonKind| {
        plan_step(&world, None, &PlannerConfig { mode, ..sc.planner }).map(|o| o.trajectory.min_speed_s())
    };
    let spatial = slowest(HorizonKind::Spatial).map_err(|e| e.to_string())?;
    let temporal = slowest(HorizonKind::Temporal).map_err(|e| e.to_string())?;
    let (ds, dev_s, dev_t) = (profile.ds(), (spatial - apex).abs(), (temporal - apex).abs());
    check(
        (below - 20.0).abs() < 0.1 && dev_s <= 2.0 * ds && dev_t > dev_s,
        format!("start {below:.2} m/s below, apex {apex:.1} m, spatial slowest at {spatial:.2} m, temporal at {temporal:.2} m"),
    )
}

/// 7. The obstacle is passed without contact or gg violations.
fn obstacle() -> Outcome {
    let sc = scenario("obstacle");
    let o = *sc.obstacles.first().ok_or("no obstacle")?;
    let setup = o.n == 0.0 && sc.start.n.abs() == 6.0 && sc.v_max == 60.0 && sc.grip.base == 0.7;
    let log = run_scenario(&sc).map_err(|e| e.to_string())?;
    let beside = log
        .states()
        .iter()
        .filter(|(_, x)| (x.s - o.s).abs() <= o.half_length)
        .map(|(_, x)| x.n.abs())
        .fold(f64::INFINITY, f64::min);
    let clearance = log.records.iter().filter_map(|r| r.clearance).fold(f64::INFINITY, f64::min);
    check(
        setup && log.stop == StopReason::Goal && log.collision_free() && log.gg_violation_steps() == 0,
        format!(
            "collision free {}, gg violations {}, min clearance {clearance:.2} m, |n| beside the object >= {beside:.2} m",
            log.collision_free(),
            log.gg_violation_steps()
        ),
    )
}

/// 8. Switching to the spatial domain and back is the identity.
fn domain_round_trip() -> Outcome {
    let mut runner = TestRunner::new(Config { cases: 10_000, failure_persistence: None, ..Config::default() });
    let states = (-1e3..1e3f64, 1.0..100.0f64, -20.0..20.0f64, -10.0..10.0f64, -10.0..10.0f64, -10.0..10.0f64);
    let worst = std::cell::Cell::new(0.0f64);
    let result = runner.run(&states, |(s, s_dot, s_ddot, n, n_dot, n_ddot)| {
        let x = FrenetState { s, s_dot, s_ddot, n, n_dot, n_ddot };
        let y = to_temporal(&to_spatial(&x).unwrap()).unwrap();
        let err = [y.s - x.s, y.s_dot - x.s_dot, y.s_ddot - x.s_ddot, y.n - x.n, y.n_dot - x.n_dot, y.n_ddot - x.n_ddot]
            .iter()
            .fold(0.0f64, |m, e| m.max(e.abs()));
        worst.set(worst.get().max(err));
        prop_assert!(err <= 1e-12);
        Ok(())
    });
    check(result.is_ok(), format!("10000 states, worst error {:.2e}", worst.get()))
}

/// 9. Profile generation time for a 600 m horizon.
fn runtime() -> Outcome {
    let spec = SyntheticTrack::new(TrackKind::Chicane { r1: 40.0, r2: 55.0, straight: 250.0, turn: 60.0, gap: 40.0 });
    let gg = GgModel::default();
    let track = spec.build(&gg).map_err(|e| e.to_string())?;
    let cfg = ApexSearchConfig { h_opt: 600.0, ds: 1.0, ..Default::default() };
    let grip = GripMap::default();
    let once = || generate_profile(&track, &gg, &grip, 50.0, 80.0, 0.0, &cfg);
    let profile = once().map_err(|e| e.to_string())?;
    let runs = 50;
    let clock = Instant::now();
    for _ in 0..runs {
        std::hint::black_box(once().map_err(|e| e.to_string())?);
    }
    let mean_ms = clock.elapsed().as_secs_f64() * 1e3 / runs as f64;
    check(
        mean_ms < 43.0 && profile.apexes.len() <= 3 && profile.s_end() - profile.s[0] >= 600.0,
        format!("mean {mean_ms:.3} ms over {runs} runs ({} apexes), bound 43 ms, target 5 ms", profile.apexes.len()),
    )
}

/// 10. The identity candidate is free and weights scale their own term only.
fn cost_sanity() -> Outcome {
    let track = Track3D::load(repo("tracks/chicane.csv")).map_err(|e| e.to_string())?;
    let gg = GgModel::default();
    let grip = GripMap::default();
    let profile = generate_profile(&track, &gg, &grip, 70.0, 80.0, 150.0, &ApexSearchConfig::default())
        .map_err(|e| e.to_string())?;
    let on = profile.at_s(150.0);
    let state = FrenetState { s: 150.0, s_dot: on.v, s_ddot: on.a, ..Default::default() };
    let config = PlannerConfig::default();
    let world = World { track: &track, gg: &gg, grip: &grip, profile: &profile, obstacles: &[], state };
    let free = evaluate_candidates(&world, &state, &config).map_err(|e| e.to_string())?;
    let identity = free.iter().find(|c| c.n_end == 0.0 && c.dv_end == 0.0).ok_or("no identity candidate")?;
    let c0 = identity.cost.total;

    let obstacles = [Obstacle { s: 200.0, n: 0.5, half_length: 2.5, half_width: 1.0 }];
    let world = World { obstacles: &obstacles, ..world };
    let base = evaluate_candidates(&world, &state, &config).map_err(|e| e.to_string())?;
    let mut exact = true;
    for i in 0..6 {
        let mut w = config.weights.as_array();
        w[i] *= 2.0;
        let weights = Weights {
            lateral: w[0],
            curvature: w[1],
            velocity: w[2],
            risk: w[3],
            severity: w[4],
            accel: w[5],
        };
        let doubled = evaluate_candidates(&world, &state, &PlannerConfig { weights, ..config }).map_err(|e| e.to_string())?;
        for (a, b) in base.iter().zip(&doubled) {
            let (ta, tb) = (a.cost.terms(), b.cost.terms());
            exact &= (0..6).all(|j| if j == i { tb[j] == 2.0 * ta[j] } else { tb[j] == ta[j] });
        }
    }
    let active = base.iter().filter(|c| c.cost.terms().iter().all(|&t| t > 0.0)).count();
    check(
        c0.abs() < 1e-9 && exact && active > 0,
        format!("identity cost {c0:.1e}, doubling exact on {} candidates ({active} with all six terms active)", base.len()),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("sqrt-alpha law", sqrt_alpha_law),
        ("FW-BW vs lattice oracle", fwbw_oracle),
        ("profile feasibility", profile_feasibility),
        ("alpha monotonicity", alpha_monotonicity),
        ("reduced-grip direction", reduced_grip),
        ("apex alignment", apex_alignment),
        ("obstacle pass", obstacle),
        ("domain round trip", domain_round_trip),
        ("profile runtime", runtime),
        ("cost sanity", cost_sanity),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("criterion {:>2} {name}: PASS ({detail})", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} {name}: FAIL ({detail})", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
