//! Acceleration limits as velocity- and load-dependent gg-diagrams.
//!
//! Sign conventions: `ax_min` is a positive braking magnitude, all other
//! accelerations are signed. Apparent accelerations (`*_app`) are what an
//! IMU would measure, velocity-frame accelerations (`*_hat`) are the
//! kinematic ones. Grip scaling `alpha` shrinks the tire-limited diamond
//! but never the engine limit.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const GRAVITY: f64 = 9.81;

/// Numerical allowance when comparing against the diamond boundary.
const BOUNDARY_EPS: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum GgError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid gg map: {0}")]
    Invalid(String),
    #[error("gg map I/O failed: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GGVertex {
    pub ax_min: f64,
    pub ax_max: f64,
    pub ay_max: f64,
    pub ax_eng: f64,
    pub rho: f64,
}

impl GGVertex {
    fn lerp(a: &GGVertex, b: &GGVertex, t: f64) -> GGVertex {
        let l = |x: f64, y: f64| x + t * (y - x);
        GGVertex {
            ax_min: l(a.ax_min, b.ax_min),
            ax_max: l(a.ax_max, b.ax_max),
            ay_max: l(a.ay_max, b.ay_max),
            ax_eng: l(a.ax_eng, b.ax_eng),
            rho: l(a.rho, b.rho),
        }
    }

    fn validate(&self) -> Result<(), String> {
        let limits = [self.ax_min, self.ax_max, self.ay_max, self.ax_eng];
        if limits.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(format!("limits must be positive: {self:?}"));
        }
        if !(self.rho >= 1.0 && self.rho.is_finite()) {
            return Err(format!("rho must be >= 1, got {}", self.rho));
        }
        Ok(())
    }
}

/// Outcome of the gg feasibility test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Feasibility {
    pub feasible: bool,
    /// Left-hand side of the diamond inequality.
    pub diamond: f64,
    /// `max(0, diamond - 1)`.
    pub diamond_violation: f64,
    /// `max(0, ax_app - ax_eng)`.
    pub engine_violation: f64,
}

/// A vertex evaluated under a grip scaling, ready for potential queries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diamond {
    pub vertex: GGVertex,
    pub alpha: f64,
    /// Scale the longitudinal tire limits by `alpha` as well as the lateral
    /// one. With this off, the potentials use the unscaled `ax_max`/`ax_min`
    /// coefficients.
    pub scale_ax: bool,
}

impl Diamond {
    pub fn new(vertex: GGVertex, alpha: f64, scale_ax: bool) -> Self {
        Diamond { vertex, alpha, scale_ax }
    }

    pub fn lateral_limit(&self) -> f64 {
        self.alpha * self.vertex.ay_max
    }

    fn ax_scale(&self) -> f64 {
        if self.scale_ax {
            self.alpha
        } else {
            1.0
        }
    }

    /// Remaining longitudinal fraction `(1 - (|ay|/(alpha ay_max))^rho)^(1/rho)`,
    /// zero once the lateral budget is spent.
    pub fn longitudinal_fraction(&self, ay_app: f64) -> f64 {
        let ratio = ay_app.abs() / self.lateral_limit();
        if ratio >= 1.0 {
            return 0.0;
        }
        let rho = self.vertex.rho;
        (1.0 - ratio.powf(rho)).powf(1.0 / rho)
    }

    pub fn forward_potential(&self, ay_app: f64) -> f64 {
        let tire = self.ax_scale() * self.vertex.ax_max * self.longitudinal_fraction(ay_app);
        tire.min(self.vertex.ax_eng)
    }

    pub fn backward_potential(&self, ay_app: f64) -> f64 {
        -self.ax_scale() * self.vertex.ax_min * self.longitudinal_fraction(ay_app)
    }

    /// Feasibility of an apparent acceleration pair, using the same
    /// longitudinal scaling as the potentials.
    pub fn check(&self, ax_app: f64, ay_app: f64) -> Feasibility {
        if self.scale_ax {
            return is_feasible(ax_app, ay_app, &self.vertex, self.alpha);
        }
        let v = &self.vertex;
        let ax_lim = if ax_app > 0.0 { v.ax_max } else { v.ax_min };
        let diamond = (ax_app.abs() / ax_lim).powf(v.rho) + (ay_app.abs() / self.lateral_limit()).powf(v.rho);
        feasibility(diamond, ax_app - v.ax_eng)
    }
}

/// Converts velocity-frame accelerations into apparent accelerations.
#[allow(clippy::too_many_arguments)]
pub fn apparent_accels(
    ax_hat: f64,
    ay_hat: f64,
    v: f64,
    w_y_hat: f64,
    phi: f64,
    mu: f64,
    chi_hat: f64,
    g: f64,
) -> [f64; 3] {
    let (s_phi, c_phi) = phi.sin_cos();
    let (s_mu, c_mu) = mu.sin_cos();
    let (s_chi, c_chi) = chi_hat.sin_cos();
    [
        ax_hat + g * (c_mu * s_phi * s_chi - s_mu * c_chi),
        ay_hat + g * (s_mu * s_chi + c_mu * s_phi * c_chi),
        w_y_hat * v + g * (c_mu * c_phi),
    ]
}

/// Inverts the longitudinal row of [`apparent_accels`].
pub fn velocity_frame_accel_potential(ax_app: f64, phi: f64, mu: f64, chi_hat: f64, g: f64) -> f64 {
    let (s_chi, c_chi) = chi_hat.sin_cos();
    ax_app - g * (mu.cos() * phi.sin() * s_chi - mu.sin() * c_chi)
}

/// Inverts the lateral row of [`apparent_accels`].
pub fn velocity_frame_lateral(ay_app: f64, phi: f64, mu: f64, chi_hat: f64, g: f64) -> f64 {
    let (s_chi, c_chi) = chi_hat.sin_cos();
    ay_app - g * (mu.sin() * s_chi + mu.cos() * phi.sin() * c_chi)
}

pub fn is_feasible(ax_app: f64, ay_app: f64, vertex: &GGVertex, alpha: f64) -> Feasibility {
    let ax_lim = if ax_app > 0.0 { vertex.ax_max } else { vertex.ax_min };
    let rho = vertex.rho;
    let diamond = (ax_app.abs() / (alpha * ax_lim)).powf(rho)
        + (ay_app.abs() / (alpha * vertex.ay_max)).powf(rho);
    feasibility(diamond, ax_app - vertex.ax_eng)
}

fn feasibility(diamond: f64, engine_excess: f64) -> Feasibility {
    let diamond_violation = (diamond - 1.0).max(0.0);
    let engine_violation = engine_excess.max(0.0);
    Feasibility {
        feasible: diamond <= 1.0 + BOUNDARY_EPS && engine_violation <= BOUNDARY_EPS,
        diamond,
        diamond_violation,
        engine_violation,
    }
}

/// Forward potential with the longitudinal coefficient scaled by `alpha`.
pub fn forward_accel_potential(ay_app: f64, vertex: &GGVertex, alpha: f64) -> f64 {
    Diamond::new(*vertex, alpha, true).forward_potential(ay_app)
}

/// Braking potential (negative) with the longitudinal coefficient scaled by
/// `alpha`.
pub fn backward_decel_potential(ay_app: f64, vertex: &GGVertex, alpha: f64) -> f64 {
    Diamond::new(*vertex, alpha, true).backward_potential(ay_app)
}

/// Gridded gg-diagrams over speed and apparent normal acceleration.
#[derive(Debug, Clone, PartialEq)]
pub struct GGMap {
    v_grid: Vec<f64>,
    g_grid: Vec<f64>,
    /// Row-major: `vertices[iv * g_grid.len() + ig]`.
    vertices: Vec<GGVertex>,
}

fn check_grid(name: &str, grid: &[f64]) -> Result<(), GgError> {
    if grid.is_empty() {
        return Err(GgError::Invalid(format!("{name} grid is empty")));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(GgError::Invalid(format!("{name} grid is not strictly ascending")));
    }
    Ok(())
}

fn bracket(grid: &[f64], x: f64) -> (usize, usize, f64) {
    if grid.len() == 1 || x <= grid[0] {
        return (0, 0, 0.0);
    }
    let last = grid.len() - 1;
    if x >= grid[last] {
        return (last, last, 0.0);
    }
    let hi = grid.partition_point(|g| *g <= x);
    let lo = hi - 1;
    (lo, hi, (x - grid[lo]) / (grid[hi] - grid[lo]))
}

impl GGMap {
    pub fn new(v_grid: Vec<f64>, g_grid: Vec<f64>, vertices: Vec<GGVertex>) -> Result<Self, GgError> {
        check_grid("v", &v_grid)?;
        check_grid("g_tilde", &g_grid)?;
        if vertices.len() != v_grid.len() * g_grid.len() {
            return Err(GgError::Invalid(format!(
                "expected {} vertices for a {}x{} grid, got {}",
                v_grid.len() * g_grid.len(),
                v_grid.len(),
                g_grid.len(),
                vertices.len()
            )));
        }
        for v in &vertices {
            v.validate().map_err(GgError::Invalid)?;
        }
        Ok(GGMap { v_grid, g_grid, vertices })
    }

    /// A map holding one vertex for every speed and load.
    pub fn constant(vertex: GGVertex) -> Result<Self, GgError> {
        GGMap::new(vec![0.0], vec![GRAVITY], vec![vertex])
    }

    pub fn v_grid(&self) -> &[f64] {
        &self.v_grid
    }

    pub fn g_grid(&self) -> &[f64] {
        &self.g_grid
    }

    fn at(&self, iv: usize, ig: usize) -> &GGVertex {
        &self.vertices[iv * self.g_grid.len() + ig]
    }

    /// Bilinear interpolation, clamped to the grid boundary.
    pub fn vertex_at(&self, v: f64, g_tilde: f64) -> GGVertex {
        let (v0, v1, tv) = bracket(&self.v_grid, v);
        let (g0, g1, tg) = bracket(&self.g_grid, g_tilde);
        let low = GGVertex::lerp(self.at(v0, g0), self.at(v0, g1), tg);
        let high = GGVertex::lerp(self.at(v1, g0), self.at(v1, g1), tg);
        GGVertex::lerp(&low, &high, tv)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, GgError> {
        let mut text = String::new();
        std::fs::File::open(path)?.read_to_string(&mut text)?;
        Self::from_csv_str(&text)
    }

    /// Parses `v,g_tilde,ax_min,ax_max,ay_max,ax_eng,rho` rows forming a
    /// complete rectangular grid in any row order.
    pub fn from_csv_str(text: &str) -> Result<Self, GgError> {
        const HEADER: [&str; 7] = ["v", "g_tilde", "ax_min", "ax_max", "ay_max", "ax_eng", "rho"];
        let mut rows: Vec<(f64, f64, GGVertex)> = Vec::new();
        let mut header_seen = false;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if !header_seen {
                if fields != HEADER {
                    return Err(GgError::Parse {
                        line: i + 1,
                        message: format!("expected header `{}`", HEADER.join(",")),
                    });
                }
                header_seen = true;
                continue;
            }
            if fields.len() != HEADER.len() {
                return Err(GgError::Parse {
                    line: i + 1,
                    message: format!("expected {} fields, found {}", HEADER.len(), fields.len()),
                });
            }
            let mut x = [0.0; 7];
            for (slot, f) in x.iter_mut().zip(&fields) {
                *slot = f.parse().map_err(|_| GgError::Parse {
                    line: i + 1,
                    message: format!("invalid number `{f}`"),
                })?;
            }
            rows.push((
                x[0],
                x[1],
                GGVertex { ax_min: x[2], ax_max: x[3], ay_max: x[4], ax_eng: x[5], rho: x[6] },
            ));
        }
        if rows.is_empty() {
            return Err(GgError::Invalid("no vertices".into()));
        }
        let mut v_grid: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let mut g_grid: Vec<f64> = rows.iter().map(|r| r.1).collect();
        for grid in [&mut v_grid, &mut g_grid] {
            grid.sort_by(f64::total_cmp);
            grid.dedup();
        }
        let mut slots: Vec<Option<GGVertex>> = vec![None; v_grid.len() * g_grid.len()];
        for (v, g, vertex) in rows {
            let iv = v_grid.partition_point(|x| *x < v);
            let ig = g_grid.partition_point(|x| *x < g);
            let slot = &mut slots[iv * g_grid.len() + ig];
            if slot.is_some() {
                return Err(GgError::Invalid(format!("duplicate vertex at v={v}, g_tilde={g}")));
            }
            *slot = Some(vertex);
        }
        let vertices = slots
            .into_iter()
            .enumerate()
            .map(|(k, s)| {
                s.ok_or_else(|| {
                    GgError::Invalid(format!(
                        "incomplete grid: missing v={}, g_tilde={}",
                        v_grid[k / g_grid.len()],
                        g_grid[k % g_grid.len()]
                    ))
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        GGMap::new(v_grid, g_grid, vertices)
    }
}

/// Closed-form gg model: tire limits proportional to the normal load,
/// engine limit from a constant power and quadratic drag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalyticGg {
    /// Tire limits at `g_tilde == GRAVITY`.
    pub ax_min: f64,
    pub ax_max: f64,
    pub ay_max: f64,
    pub rho: f64,
    /// Traction-independent cap on engine acceleration [m/s²].
    pub ax_eng_max: f64,
    /// Engine power [W].
    pub power: f64,
    /// Vehicle mass [kg].
    pub mass: f64,
    /// Drag force per squared speed [kg/m].
    pub drag: f64,
    /// Scale tire limits with `g_tilde / GRAVITY`.
    pub load_sensitive: bool,
}

impl Default for AnalyticGg {
    fn default() -> Self {
        AnalyticGg {
            ax_min: 14.0,
            ax_max: 12.0,
            ay_max: 14.0,
            rho: 1.3,
            ax_eng_max: 10.0,
            power: 450e3,
            mass: 750.0,
            drag: 0.9,
            load_sensitive: true,
        }
    }
}

impl AnalyticGg {
    /// Constant limits with no engine or load dependence; handy for checks
    /// with closed-form answers.
    pub fn constant(ax_min: f64, ax_max: f64, ay_max: f64, rho: f64) -> Self {
        AnalyticGg {
            ax_min,
            ax_max,
            ay_max,
            rho,
            ax_eng_max: f64::INFINITY,
            power: f64::INFINITY,
            mass: 1.0,
            drag: 0.0,
            load_sensitive: false,
        }
    }

    pub fn engine_limit(&self, v: f64) -> f64 {
        let power_limited = if v > 0.0 { self.power / (self.mass * v) } else { f64::INFINITY };
        let drag = self.drag * v * v / self.mass;
        (power_limited - drag).min(self.ax_eng_max).max(0.0)
    }

    pub fn vertex_at(&self, v: f64, g_tilde: f64) -> GGVertex {
        let load = if self.load_sensitive { (g_tilde / GRAVITY).max(1e-3) } else { 1.0 };
        GGVertex {
            ax_min: self.ax_min * load,
            ax_max: self.ax_max * load,
            ay_max: self.ay_max * load,
            ax_eng: self.engine_limit(v),
            rho: self.rho,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GgSource {
    Map(GGMap),
    Analytic(AnalyticGg),
}

/// The acceleration-limit model used by the solvers and the planner.
#[derive(Debug, Clone, PartialEq)]
pub struct GgModel {
    pub source: GgSource,
    pub scale_ax_coefficient: bool,
}

impl Default for GgModel {
    fn default() -> Self {
        GgModel::analytic(AnalyticGg::default())
    }
}

impl From<GGMap> for GgModel {
    fn from(map: GGMap) -> Self {
        GgModel { source: GgSource::Map(map), scale_ax_coefficient: true }
    }
}

impl GgModel {
    pub fn analytic(model: AnalyticGg) -> Self {
        GgModel { source: GgSource::Analytic(model), scale_ax_coefficient: true }
    }

    pub fn vertex_at(&self, v: f64, g_tilde: f64) -> GGVertex {
        match &self.source {
            GgSource::Map(m) => m.vertex_at(v, g_tilde),
            GgSource::Analytic(a) => a.vertex_at(v, g_tilde),
        }
    }

    pub fn diamond(&self, v: f64, g_tilde: f64, alpha: f64) -> Diamond {
        Diamond::new(self.vertex_at(v, g_tilde), alpha, self.scale_ax_coefficient)
    }
}
