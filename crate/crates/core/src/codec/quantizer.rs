use serde::{Deserialize, Serialize};

use crate::error::{param, Result};

/// Dead-zone uniform scalar quantizer with `l + 1` reproduction levels.
///
/// Level 0 is exactly zero and owns the dead zone `|s| < Δ/2`, `Δ = 2γ/l`.
/// Levels `1..=l` are the mid-rise points `-γ + (j - ½)Δ`. Inputs are clamped
/// to `[-γ, γ]`; outside the dead zone the nearest mid-rise level is chosen,
/// ties going toward `+∞`. The dead zone is open so that the levels `±Δ/2`
/// of an even `l` remain fixed points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizerSpec {
    l: usize,
    gamma: f64,
    levels: Vec<f64>,
}

impl QuantizerSpec {
    pub fn new(l: usize, gamma: f64) -> Result<Self> {
        if l == 0 {
            return param("quantizer needs at least one nonzero level");
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return param(format!("gamma must be positive, got {gamma}"));
        }
        // (2j - 1 - l) * Δ/2 keeps ±q pairs exact negatives of each other.
        let half = gamma / l as f64;
        let mut levels = Vec::with_capacity(l + 1);
        levels.push(0.0);
        levels.extend((1..=l).map(|j| (2 * j as i64 - 1 - l as i64) as f64 * half));
        Ok(Self { l, gamma, levels })
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Cell width `Δ = 2γ / l`.
    pub fn delta(&self) -> f64 {
        2.0 * self.gamma / self.l as f64
    }

    /// Reproduction values `q_0 = 0, q_1, ..., q_l`.
    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn level(&self, j: usize) -> f64 {
        self.levels[j]
    }

    /// Maps a sample to `(j, q_j)`. NaN maps to level 0.
    pub fn quantize(&self, s: f64) -> (usize, f64) {
        let j = self.index(s);
        (j, self.levels[j])
    }

    pub fn index(&self, s: f64) -> usize {
        if s.is_nan() {
            return 0;
        }
        let delta = self.delta();
        let s = s.clamp(-self.gamma, self.gamma);
        if s.abs() < delta / 2.0 {
            return 0;
        }
        // Cell boundaries of the mid-rise levels sit at -γ + jΔ.
        let j = (((s + self.gamma) / delta).floor() as i64 + 1).clamp(1, self.l as i64) as usize;
        // The zero-valued middle level of an odd l never gets a codeword.
        if self.levels[j] == 0.0 {
            0
        } else {
            j
        }
    }

    pub fn value(&self, s: f64) -> f64 {
        self.levels[self.index(s)]
    }
}
