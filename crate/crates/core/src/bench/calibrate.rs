use log::info;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, DEFAULT_BLOCK_ROWS};
use super::pipeline::{prepare, train_readout_streaming};
use crate::data::{Dataset, DatasetKind};
use crate::ddtea::{default_interval, ActivationKind, StvoConfig};
use crate::error::{Error, Result};
use crate::preprocess::PcaTarget;

/// Candidate operating points. An empty `d_t` list means "the default
/// interval `1/(n alpha)` at each `j_dc`".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationGrid {
    pub j_dc: Vec<f64>,
    pub amplitude: Vec<f64>,
    #[serde(default)]
    pub d_t: Vec<f64>,
}

impl Default for CalibrationGrid {
    fn default() -> Self {
        Self {
            j_dc: vec![6.5, 7.0, 7.5],
            amplitude: vec![0.25, 0.5, 1.0],
            d_t: vec![4e-4, 8e-4, 1.6e-3],
        }
    }
}

impl CalibrationGrid {
    /// Grid points in evaluation order (`j_dc` outermost, `d_t` innermost).
    pub fn points(&self, template: &StvoConfig) -> Vec<StvoConfig> {
        let mut out = Vec::new();
        for &j_dc in &self.j_dc {
            for &amplitude in &self.amplitude {
                let d_ts = if self.d_t.is_empty() {
                    vec![default_interval(&template.coefficients, j_dc)]
                } else {
                    self.d_t.clone()
                };
                for d_t in d_ts {
                    out.push(StvoConfig {
                        j_dc,
                        amplitude,
                        d_t,
                        ..*template
                    });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CalibrationSettings {
    pub n_theta: usize,
    /// Samples taken from the end of the training set for validation.
    pub validation: usize,
    pub seed: u64,
    /// Optional cap on the fitting samples (taken from the front) to bound runtime.
    pub max_fit: Option<usize>,
    pub block_rows: usize,
}

impl Default for CalibrationSettings {
    fn default() -> Self {
        Self {
            n_theta: 200,
            validation: 5000,
            seed: 0,
            max_fit: None,
            block_rows: DEFAULT_BLOCK_ROWS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridScore {
    pub j_dc: f64,
    pub amplitude: f64,
    pub d_t: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub best: StvoConfig,
    pub best_accuracy: f64,
    pub settings: CalibrationSettings,
    pub scores: Vec<GridScore>,
}

/// Picks the STVO operating point with the highest validation accuracy
/// (first in grid order on ties). The validation split is the tail of
/// `train`; the test set is never touched.
pub fn calibrate(
    train: &Dataset,
    pca_target: PcaTarget,
    grid: &CalibrationGrid,
    template: &StvoConfig,
    settings: &CalibrationSettings,
) -> Result<Calibration> {
    let points = grid.points(template);
    if points.is_empty() {
        return Err(Error::EmptyGrid);
    }
    for p in &points {
        p.validate().map_err(|e| grid_error(p, e))?;
    }
    if settings.validation == 0 || settings.validation >= train.len() {
        return Err(Error::InvalidConfig(format!(
            "validation split of {} samples does not fit a training set of {}",
            settings.validation,
            train.len()
        )));
    }
    let (fit, validation) = train.split_tail(settings.validation);
    let fit = match settings.max_fit {
        Some(n) => fit.head(n),
        None => fit,
    };
    let prepared = prepare(&fit, &validation, pca_target)?;

    let mut config = ExperimentConfig::new(DatasetKind::Mnist, settings.n_theta, ActivationKind::Stvo);
    config.block_rows = settings.block_rows;
    let mut scores = Vec::with_capacity(points.len());
    for p in &points {
        config.stvo = *p;
        let model = train_readout_streaming(&config, &prepared.train, prepared.n_classes, settings.seed)
            .map_err(|e| grid_error(p, e))?;
        let eval = model
            .evaluate(&prepared.test, prepared.n_classes, settings.block_rows)
            .map_err(|e| grid_error(p, e))?;
        info!(
            "calibrate j_dc={} amplitude={} d_t={:.3e}: validation accuracy {:.4}",
            p.j_dc, p.amplitude, p.d_t, eval.accuracy
        );
        scores.push(GridScore {
            j_dc: p.j_dc,
            amplitude: p.amplitude,
            d_t: p.d_t,
            accuracy: eval.accuracy,
        });
    }
    let best_idx = best_index(&scores);
    Ok(Calibration {
        best: points[best_idx],
        best_accuracy: scores[best_idx].accuracy,
        settings: *settings,
        scores,
    })
}

/// Index of the highest accuracy, earliest on ties.
pub fn best_index(scores: &[GridScore]) -> usize {
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if s.accuracy > scores[best].accuracy {
            best = i;
        }
    }
    best
}

fn grid_error(p: &StvoConfig, e: Error) -> Error {
    Error::GridPoint {
        j_dc: p.j_dc,
        amplitude: p.amplitude,
        d_t: p.d_t,
        source: Box::new(e),
    }
}
