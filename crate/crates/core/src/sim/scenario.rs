//! Scenario files.
//!
//! A scenario is a TOML document. Paths are relative to the file itself.
//!
//! ```toml
//! track = "../tracks/chicane.csv"
//! # gg = "limits.csv"            # gridded gg-diagrams; analytic model otherwise
//! v_max = 60.0
//! step_period = 0.1
//! profile_mode = "online"        # or "offline", "race-line"
//! compare_offline = true         # also run the offline reference
//!
//! [start]
//! s = 20.0
//! s_dot = 40.0
//! n = 0.0
//!
//! [stop]
//! s_goal = 480.0
//! max_steps = 400
//!
//! [sector]
//! s_from = 50.0
//! s_to = 450.0
//!
//! [[grip_zones]]
//! s_from = 150.0
//! s_to = 420.0
//! alpha = 0.7
//!
//! [[obstacles]]
//! s = 190.0
//! n = 0.0
//! half_length = 2.5
//! half_width = 1.0
//!
//! [planner]                      # any planner setting
//! s_horizon = 200.0
//!
//! [profile]                      # apex search and horizon settings
//! h_opt = 600.0
//!
//! [analytic_gg]                  # analytic gg-diagram settings
//! ay_max = 14.0
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::apex::ApexSearchConfig;
use crate::ggcon::{AnalyticGg, GGMap, GgError, GgModel};
use crate::grip::{GripMap, GripZone};
use crate::planner::{FrenetState, Obstacle, PlannerConfig};
use crate::track3d::{Track3D, TrackError};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("scenario {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("track {path}: {source}")]
    Track { path: PathBuf, source: TrackError },
    #[error("gg-diagram {path}: {source}")]
    Gg { path: PathBuf, source: GgError },
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileMode {
    /// Regenerate the profile every step from the current grip map.
    #[default]
    Online,
    /// Freeze a full-grip profile generated before the run from the start
    /// speed.
    Offline,
    /// Freeze a full-grip profile that starts on the track's offline speed,
    /// whatever the vehicle's speed.
    RaceLine,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopCondition {
    pub s_goal: Option<f64>,
    pub max_steps: usize,
}

impl Default for StopCondition {
    fn default() -> Self {
        StopCondition { s_goal: None, max_steps: 1000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sector {
    pub s_from: f64,
    pub s_to: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    track: PathBuf,
    gg: Option<PathBuf>,
    #[serde(default)]
    analytic_gg: Option<AnalyticGg>,
    #[serde(default = "default_true")]
    scale_ax_coefficient: bool,
    #[serde(default)]
    grip_zones: Vec<GripZone>,
    #[serde(default = "one")]
    base_alpha: f64,
    #[serde(default)]
    obstacles: Vec<Obstacle>,
    start: FrenetState,
    v_max: f64,
    #[serde(default = "default_period")]
    step_period: f64,
    #[serde(default)]
    stop: StopCondition,
    sector: Option<Sector>,
    #[serde(default)]
    planner: PlannerConfig,
    #[serde(default)]
    profile: ApexSearchConfig,
    #[serde(default)]
    profile_mode: ProfileMode,
    #[serde(default = "default_true")]
    latency_compensation: bool,
    #[serde(default)]
    compare_offline: bool,
}

fn default_true() -> bool {
    true
}

fn one() -> f64 {
    1.0
}

fn default_period() -> f64 {
    0.1
}

/// A fully resolved scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub track: Track3D,
    pub gg: GgModel,
    pub grip: GripMap,
    pub obstacles: Vec<Obstacle>,
    pub start: FrenetState,
    pub v_max: f64,
    pub step_period: f64,
    pub stop: StopCondition,
    pub sector: Option<Sector>,
    pub planner: PlannerConfig,
    pub profile: ApexSearchConfig,
    pub profile_mode: ProfileMode,
    /// Start each plan `t_const` ahead on the previous plan.
    pub latency_compensation: bool,
    pub compare_offline: bool,
}

impl Scenario {
    /// A scenario with default settings on `track`.
    pub fn new(track: Track3D, start: FrenetState, v_max: f64) -> Self {
        Scenario {
            track,
            gg: GgModel::default(),
            grip: GripMap::default(),
            obstacles: Vec::new(),
            start,
            v_max,
            step_period: 0.1,
            stop: StopCondition::default(),
            sector: None,
            planner: PlannerConfig::default(),
            profile: ApexSearchConfig::default(),
            profile_mode: ProfileMode::Online,
            latency_compensation: true,
            compare_offline: false,
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io { path: path.into(), source })?;
        Self::from_toml(&text, path.parent().unwrap_or(Path::new(".")), path)
    }

    /// Parses a scenario document; relative paths resolve against `base`.
    pub fn from_toml(text: &str, base: &Path, name: &Path) -> Result<Self, ScenarioError> {
        let file: ScenarioFile =
            toml::from_str(text).map_err(|e| ScenarioError::Parse { path: name.into(), message: e.to_string() })?;
        let track_path = base.join(&file.track);
        let track =
            Track3D::load(&track_path).map_err(|source| ScenarioError::Track { path: track_path.clone(), source })?;
        let mut gg = match &file.gg {
            Some(p) => {
                let gg_path = base.join(p);
                GgModel::from(GGMap::load(&gg_path).map_err(|source| ScenarioError::Gg { path: gg_path.clone(), source })?)
            }
            None => GgModel::analytic(file.analytic_gg.unwrap_or_default()),
        };
        gg.scale_ax_coefficient = file.scale_ax_coefficient;
        let scenario = Scenario {
            track,
            gg,
            grip: GripMap { base: file.base_alpha, zones: file.grip_zones },
            obstacles: file.obstacles,
            start: file.start,
            v_max: file.v_max,
            step_period: file.step_period,
            stop: file.stop,
            sector: file.sector,
            planner: file.planner,
            profile: file.profile,
            profile_mode: file.profile_mode,
            latency_compensation: file.latency_compensation,
            compare_offline: file.compare_offline,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: String| Err(ScenarioError::Invalid(m));
        self.grip.validate().map_err(ScenarioError::Invalid)?;
        let lap = self.track.s_lap();
        for z in &self.grip.zones {
            if z.s_from < 0.0 || z.s_to > lap + 1e-9 {
                return bad(format!("grip zone [{}, {}] outside the track [0, {lap}]", z.s_from, z.s_to));
            }
        }
        if !(self.step_period > 0.0) {
            return bad(format!("step_period must be positive, got {}", self.step_period));
        }
        if !(self.v_max > 0.0) {
            return bad(format!("v_max must be positive, got {}", self.v_max));
        }
        if !(self.start.s_dot > 0.0) {
            return bad(format!("start speed must be positive, got {}", self.start.s_dot));
        }
        if self.stop.max_steps == 0 {
            return bad("stop.max_steps must be at least 1".into());
        }
        for o in &self.obstacles {
            if !(o.half_length >= 0.0 && o.half_width >= 0.0) {
                return bad("obstacle half sizes must be >= 0".into());
            }
        }
        self.planner.validate().map_err(ScenarioError::Invalid)?;
        self.profile.validate().map_err(ScenarioError::Invalid)?;
        Ok(())
    }

    /// Sets one value by dotted key, as in `planner.s_horizon=150`.
    pub fn apply_override(&mut self, key: &str, value: &str) -> Result<(), ScenarioError> {
        let num = || -> Result<f64, ScenarioError> {
            value.parse().map_err(|_| ScenarioError::Invalid(format!("{key}: expected a number, got {value:?}")))
        };
        let flag = || -> Result<bool, ScenarioError> {
            value.parse().map_err(|_| ScenarioError::Invalid(format!("{key}: expected true or false, got {value:?}")))
        };
        match key {
            "v_max" => self.v_max = num()?,
            "alpha" => self.grip = GripMap::uniform(num()?),
            "step_period" => self.step_period = num()?,
            "profile_mode" => {
                self.profile_mode = match value {
                    "online" => ProfileMode::Online,
                    "offline" => ProfileMode::Offline,
                    "race-line" => ProfileMode::RaceLine,
                    _ => {
                        return Err(ScenarioError::Invalid(format!(
                            "profile_mode must be online, offline or race-line, got {value:?}"
                        )))
                    }
                }
            }
            "mode" | "planner.mode" => {
                self.planner.mode = match value {
                    "spatial" => crate::planner::HorizonKind::Spatial,
                    "temporal" => crate::planner::HorizonKind::Temporal,
                    _ => return Err(ScenarioError::Invalid(format!("mode must be spatial or temporal, got {value:?}"))),
                }
            }
            "latency_compensation" => self.latency_compensation = flag()?,
            "compare_offline" => self.compare_offline = flag()?,
            "stop.s_goal" => self.stop.s_goal = Some(num()?),
            "stop.max_steps" => self.stop.max_steps = num()? as usize,
            "start.s" => self.start.s = num()?,
            "start.s_dot" => self.start.s_dot = num()?,
            "start.n" => self.start.n = num()?,
            _ => {
                if let Some(field) = key.strip_prefix("planner.") {
                    self.planner = patch(&self.planner, field, value)?;
                } else if let Some(field) = key.strip_prefix("profile.") {
                    self.profile = patch(&self.profile, field, value)?;
                } else {
                    return Err(ScenarioError::Invalid(format!("unknown setting {key:?}")));
                }
            }
        }
        self.validate()
    }
}

/// Replaces one field of a serializable config through its TOML form.
fn patch<T: Serialize + for<'de> Deserialize<'de>>(config: &T, key: &str, value: &str) -> Result<T, ScenarioError> {
    let mut table = toml::Table::try_from(config).map_err(|e| ScenarioError::Invalid(e.to_string()))?;
    let (head, rest) = key.split_once('.').unwrap_or((key, ""));
    let parsed: toml::Value = toml::from_str::<toml::Table>(&format!("x = {value}"))
        .ok()
        .and_then(|t| t.get("x").cloned())
        .unwrap_or_else(|| toml::Value::String(value.to_string()));
    let slot = if rest.is_empty() {
        table.get_mut(head)
    } else {
        table.get_mut(head).and_then(|v| v.as_table_mut()).and_then(|t| t.get_mut(rest))
    };
    match slot {
        Some(v) => *v = parsed,
        None => return Err(ScenarioError::Invalid(format!("unknown setting {key:?}"))),
    }
    table.try_into().map_err(|e: toml::de::Error| ScenarioError::Invalid(format!("{key}: {e}")))
}
