//! Grip scaling along the track.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GripZone {
    pub s_from: f64,
    pub s_to: f64,
    pub alpha: f64,
}

/// Piecewise-constant `alpha(s)` over track coordinates. Later zones win
/// where zones overlap; outside every zone `base` applies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GripMap {
    pub base: f64,
    pub zones: Vec<GripZone>,
}

impl Default for GripMap {
    fn default() -> Self {
        GripMap::uniform(1.0)
    }
}

impl GripMap {
    pub fn uniform(alpha: f64) -> Self {
        GripMap { base: alpha, zones: Vec::new() }
    }

    pub fn with_zone(mut self, s_from: f64, s_to: f64, alpha: f64) -> Self {
        self.zones.push(GripZone { s_from, s_to, alpha });
        self
    }

    pub fn validate(&self) -> Result<(), String> {
        let ok = |a: f64| a > 0.0 && a <= 1.0;
        if !ok(self.base) {
            return Err(format!("base alpha {} outside (0, 1]", self.base));
        }
        for z in &self.zones {
            if !ok(z.alpha) {
                return Err(format!("zone alpha {} outside (0, 1]", z.alpha));
            }
            if !(z.s_to > z.s_from) {
                return Err(format!("empty grip zone [{}, {}]", z.s_from, z.s_to));
            }
        }
        Ok(())
    }

    /// `alpha` at a (wrapped) track coordinate. Zones are half-open
    /// `[s_from, s_to)`.
    pub fn at(&self, s: f64) -> f64 {
        self.zones
            .iter()
            .rev()
            .find(|z| s >= z.s_from && s < z.s_to)
            .map_or(self.base, |z| z.alpha)
    }

    /// Smallest `alpha` over `[a, b]`, both in wrapped track coordinates
    /// with `a <= b`.
    pub fn min_over(&self, a: f64, b: f64) -> f64 {
        let mut alpha = self.at(a).min(self.at(b));
        for z in &self.zones {
            for edge in [z.s_from, z.s_to] {
                if edge > a && edge < b {
                    alpha = alpha.min(self.at(edge)).min(self.at(edge - 1e-9));
                }
            }
        }
        alpha
    }
}
