use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::ddtea::StvoConfig;

/// Training-set statistics of the masked values `x''`.
///
/// `min`/`max` drive the affine map onto the current window; `rms` is the
/// scale used by the conventional activations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleStats {
    pub min: f64,
    pub max: f64,
    pub rms: f64,
    pub count: u64,
}

impl Default for ScaleStats {
    fn default() -> Self {
        Self::empty()
    }
}

impl ScaleStats {
    pub fn empty() -> Self {
        Self {
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
            rms: 0.0,
            count: 0,
        }
    }

    pub fn from_values<'a>(values: impl IntoIterator<Item = &'a f64>) -> Self {
        let mut acc = StatsAccumulator::default();
        acc.extend(values);
        acc.finish()
    }

    pub fn from_block(block: ArrayView2<'_, f64>) -> Self {
        Self::from_values(block.iter())
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.min + self.max)
    }

    /// Maps `x` to `[-1, 1]` by the training min/max, clamping outliers.
    #[inline]
    pub fn normalize(&self, x: f64) -> f64 {
        let half = 0.5 * (self.max - self.min);
        if !(half > 0.0) {
            return 0.0;
        }
        ((x - self.midpoint()) / half).clamp(-1.0, 1.0)
    }
}

/// Streaming min/max/sum-of-squares over masked values.
#[derive(Debug, Clone, Copy)]
pub struct StatsAccumulator {
    min: f64,
    max: f64,
    sum_sq: f64,
    count: u64,
}

impl Default for StatsAccumulator {
    fn default() -> Self {
        Self {
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
            sum_sq: 0.0,
            count: 0,
        }
    }
}

impl StatsAccumulator {
    pub fn extend<'a>(&mut self, values: impl IntoIterator<Item = &'a f64>) {
        for &v in values {
            self.min = self.min.min(v);
            self.max = self.max.max(v);
            self.sum_sq += v * v;
            self.count += 1;
        }
    }

    pub fn finish(&self) -> ScaleStats {
        ScaleStats {
            min: self.min,
            max: self.max,
            rms: if self.count > 0 {
                (self.sum_sq / self.count as f64).sqrt()
            } else {
                0.0
            },
            count: self.count,
        }
    }
}

/// Builds the drive `J_i = j_dc + amplitude * normalize(x''_i)`.
pub fn to_current(x_doubleprime: &[f64], config: &StvoConfig, stats: &ScaleStats) -> Vec<f64> {
    let mut out = vec![0.0; x_doubleprime.len()];
    to_current_into(x_doubleprime, config, stats, &mut out);
    out
}

pub(crate) fn to_current_into(x: &[f64], config: &StvoConfig, stats: &ScaleStats, out: &mut [f64]) {
    for (o, &v) in out.iter_mut().zip(x) {
        *o = config.j_dc + config.amplitude * stats.normalize(v);
    }
}
