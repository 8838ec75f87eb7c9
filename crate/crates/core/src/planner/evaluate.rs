//! Per-sample kinematics, feasibility checks and cost integrals.

use serde::{Deserialize, Serialize};

use super::frenet::FrenetState;
use super::{CostBreakdown, Obstacle, PlannerConfig, Trajectory, TrajectorySample, World};
use crate::ggcon::{apparent_accels, GgModel, GRAVITY};
use crate::grip::GripMap;
use crate::track3d::Track3D;
use crate::velprofile::VelocityProfile;

/// Vehicle motion at one Frenet state. Path curvature uses the standard
/// curvilinear relation with the reference curvature's own derivative
/// neglected:
/// `kappa = ((n'' + k n' tan chi) cos^2 chi / (1 - k n) + k) cos chi / (1 - k n)`
/// with `k = omega_z` and `chi = atan(n' / (1 - k n))`.
pub fn kinematics(track: &Track3D, t: f64, state: FrenetState, n_prime: f64, n_pprime: f64) -> TrajectorySample {
    let smp = track.sample(state.s);
    let rate = smp.angular_rate();
    let k = rate.omega_z;
    let one = 1.0 - k * state.n;
    let q = one.hypot(n_prime);
    let v = state.s_dot * q;
    let chi = n_prime.atan2(one);
    let (c, tan) = (one / q, n_prime / one);
    let kappa = ((n_pprime + k * n_prime * tan) * c * c / one + k) * c / one;
    let ax_hat = state.s_ddot * q + state.s_dot * state.s_dot * n_prime * (n_pprime - k * one) / q;
    let ay_hat = v * v * kappa;
    let [ax_app, ay_app, g_tilde] =
        apparent_accels(ax_hat, ay_hat, v, rate.omega_y * state.s_dot, smp.phi, smp.mu, chi, GRAVITY);
    let pose = smp.pose();
    let p = pose.origin + pose.n * state.n;
    TrajectorySample {
        t,
        state,
        n_prime,
        n_pprime,
        x: p.x,
        y: p.y,
        z: p.z,
        v,
        ax_hat,
        ay_hat,
        kappa,
        chi,
        ax_app,
        ay_app,
        g_tilde,
    }
}

/// Excess over the gg-diagram at a sample: the diamond inequality's
/// excess over one, or the relative excess over the engine limit.
fn gg_violation(track: &Track3D, gg: &GgModel, grip: &GripMap, p: &TrajectorySample) -> f64 {
    let alpha = grip.at(track.wrap_progress(p.state.s));
    let diamond = gg.diamond(p.v, p.g_tilde, alpha);
    let f = diamond.check(p.ax_app, p.ay_app);
    let eng = diamond.vertex.ax_eng;
    let engine = if eng.is_finite() && eng > 0.0 { f.engine_violation / eng } else { 0.0 };
    f.diamond_violation.max(engine)
}

/// Gap between the vehicle footprint at `(s, n)` and an obstacle inflated
/// by the margin; zero when they overlap.
pub fn obstacle_distance(track: &Track3D, s: f64, n: f64, obstacle: &Obstacle, config: &PlannerConfig) -> f64 {
    let ds = track.progress_delta(obstacle.s, s).abs();
    let dn = (n - obstacle.n).abs();
    let gap_s = (ds - config.vehicle_half_length - obstacle.half_length - config.obstacle_margin).max(0.0);
    let gap_n = (dn - config.vehicle_half_width - obstacle.half_width - config.obstacle_margin).max(0.0);
    gap_s.hypot(gap_n)
}

fn nearest_obstacle(track: &Track3D, p: &TrajectorySample, obstacles: &[Obstacle], config: &PlannerConfig) -> f64 {
    obstacles
        .iter()
        .map(|o| obstacle_distance(track, p.state.s, p.state.n, o, config))
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Verdicts {
    pub feasible: bool,
    pub curvature_ok: bool,
    pub max_abs_kappa: f64,
    pub bounds_ok: bool,
    /// Index of the first sample off the track.
    pub first_out_of_bounds: Option<usize>,
    /// Largest distance beyond a track edge [m].
    pub max_bound_excess: f64,
    pub collision_free: bool,
    pub min_obstacle_distance: f64,
    pub gg_ok: bool,
    pub max_gg_violation: f64,
    /// Time integral of the squared gg excess beyond the slack [s].
    pub gg_excess_integral: f64,
}

impl Default for Verdicts {
    fn default() -> Self {
        Verdicts {
            feasible: true,
            curvature_ok: true,
            max_abs_kappa: 0.0,
            bounds_ok: true,
            first_out_of_bounds: None,
            max_bound_excess: 0.0,
            collision_free: true,
            min_obstacle_distance: f64::INFINITY,
            gg_ok: true,
            max_gg_violation: 0.0,
            gg_excess_integral: 0.0,
        }
    }
}

impl Verdicts {
    /// Ranking of the hard failures: collisions first, then leaving the
    /// track, then curvature. Zero when all three pass.
    pub fn hard_severity(&self) -> f64 {
        let mut score = 0.0;
        if !self.curvature_ok {
            score += 1.0 + self.max_abs_kappa;
        }
        if !self.bounds_ok {
            score += 1e2 * (1.0 + self.max_bound_excess);
        }
        if !self.collision_free {
            score += 1e6;
        }
        score
    }
}

/// The planner's three checks plus collision. Verdicts depend only on the
/// samples.
pub fn check_feasibility(
    traj: &Trajectory,
    track: &Track3D,
    gg: &GgModel,
    grip: &GripMap,
    obstacles: &[Obstacle],
    config: &PlannerConfig,
) -> Verdicts {
    let mut v = Verdicts::default();
    let mut excess_sq = Vec::with_capacity(traj.samples.len());
    for (i, p) in traj.samples.iter().enumerate() {
        v.max_abs_kappa = v.max_abs_kappa.max(p.kappa.abs());
        let smp = track.sample(p.state.s);
        let excess = (p.state.n - smp.w_left).max(-smp.w_right - p.state.n);
        if excess > 0.0 {
            v.max_bound_excess = v.max_bound_excess.max(excess);
            v.first_out_of_bounds.get_or_insert(i);
        }
        v.min_obstacle_distance = v.min_obstacle_distance.min(nearest_obstacle(track, p, obstacles, config));
        let gg_excess = gg_violation(track, gg, grip, p);
        v.max_gg_violation = v.max_gg_violation.max(gg_excess);
        excess_sq.push((gg_excess - config.slack).max(0.0).powi(2));
    }
    v.gg_excess_integral = trapezoid(&traj.samples, &excess_sq);
    v.curvature_ok = v.max_abs_kappa <= config.kappa_max();
    v.bounds_ok = v.first_out_of_bounds.is_none();
    v.collision_free = v.min_obstacle_distance > 0.0;
    v.gg_ok = v.max_gg_violation <= config.slack;
    v.feasible = v.curvature_ok && v.bounds_ok && v.collision_free && v.gg_ok;
    v
}

/// Reference motion at `s`: on the line at profile speed.
fn reference_sample(track: &Track3D, profile: &VelocityProfile, s: f64) -> TrajectorySample {
    let r = profile.at_s(s);
    let state = FrenetState { s, s_dot: r.v, s_ddot: r.a, ..Default::default() };
    kinematics(track, 0.0, state, 0.0, 0.0)
}

fn trapezoid(samples: &[TrajectorySample], values: &[f64]) -> f64 {
    samples
        .windows(2)
        .zip(values.windows(2))
        .map(|(p, c)| 0.5 * (c[0] + c[1]) * (p[1].t - p[0].t))
        .sum()
}

/// Weighted cost integrals. The gg term only counts violation beyond what
/// the reference motion itself shows at the same arclength, so the
/// profile's own discretization is never penalized.
pub fn evaluate_cost(traj: &Trajectory, world: &World, config: &PlannerConfig) -> CostBreakdown {
    let samples = &traj.samples;
    let n = samples.len();
    let mut terms: [Vec<f64>; 6] = std::array::from_fn(|_| Vec::with_capacity(n));
    let has_obstacles = !world.obstacles.is_empty();
    let mut closest = (f64::INFINITY, 0.0);
    for p in samples {
        let s = p.state.s;
        let omega_z = world.track.angular_rate(s).omega_z;
        let v_ref = world.profile.at_s(s).v;
        terms[0].push(p.state.n * p.state.n);
        terms[1].push((p.kappa - omega_z).powi(2));
        terms[2].push((p.v - v_ref).powi(2));
        let risk = if has_obstacles {
            let d = nearest_obstacle(world.track, p, world.obstacles, config);
            if d < closest.0 {
                closest = (d, p.v);
            }
            (-d / config.risk_length).exp()
        } else {
            0.0
        };
        terms[3].push(risk);
        let own = gg_violation(world.track, world.gg, world.grip, p);
        let excess = if own > 0.0 {
            let reference = reference_sample(world.track, world.profile, s);
            (own - gg_violation(world.track, world.gg, world.grip, &reference)).max(0.0)
        } else {
            0.0
        };
        terms[5].push(excess * excess);
    }
    let severity = if has_obstacles && closest.0.is_finite() {
        closest.1 * closest.1 * (-closest.0 / config.risk_length).exp()
    } else {
        0.0
    };
    terms[4] = vec![severity; n];
    let w = config.weights.as_array();
    let parts: Vec<f64> = (0..6).map(|i| w[i] * trapezoid(samples, &terms[i])).collect();
    CostBreakdown {
        lateral_deviation: parts[0],
        curvature_deviation: parts[1],
        velocity_deviation: parts[2],
        collision_risk: parts[3],
        collision_severity: parts[4],
        accel_violation: parts[5],
        total: parts.iter().sum(),
    }
}
