use std::time::Instant;

use log::{debug, info};
use ndarray::{s, Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::metrics::{accuracy, mean_std, nrmse};
use crate::data::Dataset;
use crate::ddtea::{ActivationKind, CoreState, StvoConfig};
use crate::error::{Error, Result};
use crate::preprocess::{fit_pca, generate_mask, PcaModel, PcaTarget, RandomMask, ScaleStats, StatsAccumulator};
use crate::readout::{classify_rows, pseudoinverse, GramAccumulator, ReadoutWeights, TargetMatrix};

pub const RECORD_SCHEMA_VERSION: u32 = 1;

/// PCA-reduced inputs with their labels.
#[derive(Debug, Clone)]
pub struct Projected {
    /// `n_samples x n_f`.
    pub x: Array2<f64>,
    pub labels: Vec<usize>,
}

impl Projected {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Everything that does not depend on the mask seed: the PCA model and the
/// projected train/test sets.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub pca: PcaModel,
    pub train: Projected,
    pub test: Projected,
    pub n_classes: usize,
}

impl PreparedData {
    pub fn n_f(&self) -> usize {
        self.pca.n_components()
    }
}

/// Fits PCA on `train` only and projects both splits.
pub fn prepare(train: &Dataset, test: &Dataset, target: PcaTarget) -> Result<PreparedData> {
    if train.n_classes != test.n_classes {
        return Err(Error::DimensionMismatch {
            what: "class count",
            expected: train.n_classes,
            found: test.n_classes,
        });
    }
    let t0 = Instant::now();
    let pca = fit_pca(train.images.view(), target).map_err(|e| e.context("fitting PCA"))?;
    info!(
        "PCA on {} images: n_f = {} ({:.1}% variance) in {:.1?}",
        train.len(),
        pca.n_components(),
        100.0 * pca.cumulative_ratio(),
        t0.elapsed()
    );
    let train_x = pca.project_batch(train.images.view())?;
    let test_x = pca.project_batch(test.images.view())?;
    Ok(PreparedData {
        pca,
        train: Projected {
            x: train_x,
            labels: train.labels.clone(),
        },
        test: Projected {
            x: test_x,
            labels: test.labels.clone(),
        },
        n_classes: train.n_classes,
    })
}

/// Mask, input scaling and node nonlinearity: maps reduced inputs `x'` to
/// reservoir outputs.
///
/// STVO nodes are driven by `J = j_dc + amplitude * normalize(x'')`; the
/// conventional activations see `u = x'' / rms(x'')`, with the sigmoid
/// evaluated at `u + sigmoid_offset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReservoirEncoder {
    pub mask: RandomMask,
    pub stats: ScaleStats,
    pub activation: ActivationKind,
    pub stvo: StvoConfig,
    pub sigmoid_offset: f64,
}

impl ReservoirEncoder {
    /// Draws the mask and measures `x''` statistics on the training inputs.
    pub fn fit(
        x_prime_train: ArrayView2<'_, f64>,
        n_theta: usize,
        seed: u64,
        activation: ActivationKind,
        stvo: StvoConfig,
        sigmoid_offset: f64,
        block_rows: usize,
    ) -> Result<Self> {
        let mask = generate_mask(n_theta, x_prime_train.ncols(), seed);
        let mut acc = StatsAccumulator::default();
        for_blocks(x_prime_train.nrows(), block_rows, |start, end| {
            let xpp = mask.encode_batch(x_prime_train.slice(s![start..end, ..]))?;
            acc.extend(xpp.iter());
            Ok(())
        })?;
        Ok(Self {
            mask,
            stats: acc.finish(),
            activation,
            stvo,
            sigmoid_offset,
        })
    }

    pub fn n_theta(&self) -> usize {
        self.mask.n_theta()
    }

    pub fn n_f(&self) -> usize {
        self.mask.n_f()
    }

    /// Reservoir outputs (`rows x n_theta`) for a block of reduced inputs.
    ///
    /// `carry` holds the oscillator state between blocks when the STVO runs
    /// continuously across images; it is ignored in reset-per-image mode.
    /// `first_index` is the position of the block's first image, for diagnostics.
    pub fn transform(
        &self,
        x_prime: ArrayView2<'_, f64>,
        carry: &mut Option<CoreState>,
        first_index: usize,
    ) -> Result<Array2<f64>> {
        let mut out = self.mask.encode_batch(x_prime)?;
        let n = self.n_theta();
        if n == 0 || out.is_empty() {
            return Ok(out);
        }
        let buf = out.as_slice_mut().expect("matrix product is in standard layout");
        match self.activation {
            ActivationKind::Stvo => {
                let start = self.stvo.initial_state()?;
                let cfg = &self.stvo;
                let stats = &self.stats;
                let run_row = |(r, row): (usize, &mut [f64]), signal: &mut Vec<f64>| -> Result<CoreState> {
                    signal.clear();
                    signal.extend(row.iter().map(|&v| cfg.j_dc + cfg.amplitude * stats.normalize(v)));
                    cfg.drive(start, signal, row)
                        .map_err(|e| e.context(format!("image {}", first_index + r)))
                };
                if cfg.reset_per_sample_block {
                    buf.par_chunks_mut(n)
                        .enumerate()
                        .try_for_each_init(Vec::new, |signal, item| run_row(item, signal).map(|_| ()))?;
                } else {
                    // the state threads through images in order
                    let mut s = carry.unwrap_or(start);
                    let mut signal = Vec::with_capacity(n);
                    for (r, row) in buf.chunks_mut(n).enumerate() {
                        signal.clear();
                        signal.extend(row.iter().map(|&v| cfg.j_dc + cfg.amplitude * stats.normalize(v)));
                        s = cfg
                            .drive(s, &signal, row)
                            .map_err(|e| e.context(format!("image {}", first_index + r)))?;
                    }
                    *carry = Some(s);
                }
            }
            kind => {
                let scale = if self.stats.rms > 0.0 {
                    1.0 / self.stats.rms
                } else {
                    1.0
                };
                let offset = if kind == ActivationKind::Sigmoid {
                    self.sigmoid_offset
                } else {
                    0.0
                };
                buf.par_chunks_mut(n).for_each(|row| {
                    for v in row.iter_mut() {
                        *v = kind.pointwise(*v * scale + offset);
                    }
                });
            }
        }
        Ok(out)
    }
}

fn for_blocks(n: usize, block_rows: usize, mut f: impl FnMut(usize, usize) -> Result<()>) -> Result<()> {
    let block_rows = block_rows.max(1);
    let mut start = 0;
    while start < n {
        let end = (start + block_rows).min(n);
        f(start, end)?;
        start = end;
    }
    Ok(())
}

/// Encoder plus trained readout for one mask seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedReadout {
    pub encoder: ReservoirEncoder,
    pub weights: ReadoutWeights,
    /// Common-mode shrink factor used while solving, if any.
    pub deflation: Option<f64>,
}

/// Test-set outcome of a trained model.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub predictions: Vec<usize>,
    /// `n_samples x n_classes`.
    pub scores: Array2<f64>,
    pub accuracy: f64,
    pub nrmse: f64,
}

/// Streams the training inputs through the reservoir and solves the readout.
pub fn train_readout_streaming(
    config: &ExperimentConfig,
    train: &Projected,
    n_classes: usize,
    seed: u64,
) -> Result<TrainedReadout> {
    let t0 = Instant::now();
    let encoder = ReservoirEncoder::fit(
        train.x.view(),
        config.n_theta,
        seed,
        config.activation,
        config.stvo,
        config.sigmoid_offset,
        config.block_rows,
    )?;
    let mut acc = GramAccumulator::new(config.n_theta, n_classes, config.ridge_lambda)?;
    let mut carry = None;
    for_blocks(train.len(), config.block_rows, |start, end| {
        let features = encoder.transform(train.x.slice(s![start..end, ..]), &mut carry, start)?;
        acc.push(features.view(), &train.labels[start..end])
    })?;
    let deflation = acc.deflation();
    debug!("seed {seed}: reservoir + Gram in {:.1?}", t0.elapsed());
    let weights = acc
        .finish()
        .map_err(|e| e.context(format!("solving readout for seed {seed}")))?;
    debug!("seed {seed}: trained in {:.1?}", t0.elapsed());
    Ok(TrainedReadout {
        encoder,
        weights,
        deflation,
    })
}

impl TrainedReadout {
    /// Scores, predictions, accuracy and NRMSE on reduced inputs.
    pub fn evaluate(&self, data: &Projected, n_classes: usize, block_rows: usize) -> Result<Evaluation> {
        let mut scores = Array2::<f64>::zeros((data.len(), n_classes));
        let mut carry = None;
        for_blocks(data.len(), block_rows, |start, end| {
            let features = self
                .encoder
                .transform(data.x.slice(s![start..end, ..]), &mut carry, start)?;
            scores
                .slice_mut(s![start..end, ..])
                .assign(&features.dot(&self.weights.w_out.t()));
            Ok(())
        })?;
        let predictions = classify_rows(scores.view());
        let targets = TargetMatrix::from_labels(&data.labels, n_classes)?;
        let nrmse = nrmse(scores.t(), &targets)?;
        Ok(Evaluation {
            accuracy: accuracy(&predictions, &data.labels),
            predictions,
            scores,
            nrmse,
        })
    }
}

/// Per-seed metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub accuracy: f64,
    pub nrmse: f64,
    pub wall_ms: u64,
}

/// One `(dataset, activation, n_theta)` cell over all its mask seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    pub n_f: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub per_seed: Vec<SeedResult>,
    pub accuracy_mean: f64,
    pub accuracy_std: f64,
    pub nrmse_mean: f64,
    pub nrmse_std: f64,
    pub wall_ms: u64,
    #[serde(default)]
    pub artifacts: Vec<String>,
}

impl ExperimentRecord {
    pub fn from_seeds(config: &ExperimentConfig, prepared: &PreparedData, per_seed: Vec<SeedResult>) -> Self {
        let acc: Vec<f64> = per_seed.iter().map(|r| r.accuracy).collect();
        let err: Vec<f64> = per_seed.iter().map(|r| r.nrmse).collect();
        let (accuracy_mean, accuracy_std) = mean_std(&acc);
        let (nrmse_mean, nrmse_std) = mean_std(&err);
        Self {
            schema_version: RECORD_SCHEMA_VERSION,
            config: config.clone(),
            n_f: prepared.n_f(),
            n_train: prepared.train.len(),
            n_test: prepared.test.len(),
            wall_ms: per_seed.iter().map(|r| r.wall_ms).sum(),
            per_seed,
            accuracy_mean,
            accuracy_std,
            nrmse_mean,
            nrmse_std,
            artifacts: Vec::new(),
        }
    }
}

/// Record plus the test predictions of every seed, in seed order.
#[derive(Debug, Clone)]
pub struct ExperimentRun {
    pub record: ExperimentRecord,
    pub predictions: Vec<Vec<usize>>,
}

/// Trains and evaluates one seed.
pub fn run_seed(config: &ExperimentConfig, prepared: &PreparedData, seed: u64) -> Result<(SeedResult, Evaluation)> {
    let t0 = Instant::now();
    let model = train_readout_streaming(config, &prepared.train, prepared.n_classes, seed)?;
    let eval = model.evaluate(&prepared.test, prepared.n_classes, config.block_rows)?;
    let result = SeedResult {
        seed,
        accuracy: eval.accuracy,
        nrmse: eval.nrmse,
        wall_ms: t0.elapsed().as_millis() as u64,
    };
    info!(
        "{} {} n_theta={} seed={}: accuracy {:.4}, nrmse {:.4} ({} ms)",
        config.dataset, config.activation, config.n_theta, seed, result.accuracy, result.nrmse, result.wall_ms
    );
    Ok((result, eval))
}

/// Runs every mask seed of `config` on already-prepared data.
pub fn run_prepared(config: &ExperimentConfig, prepared: &PreparedData) -> Result<ExperimentRun> {
    config.validate()?;
    let mut per_seed = Vec::new();
    let mut predictions = Vec::new();
    for seed in config.seeds() {
        let (result, eval) = run_seed(config, prepared, seed)?;
        per_seed.push(result);
        predictions.push(eval.predictions);
    }
    Ok(ExperimentRun {
        record: ExperimentRecord::from_seeds(config, prepared, per_seed),
        predictions,
    })
}

/// Full pipeline: PCA on `train`, then every mask seed end to end.
pub fn run_experiment(config: &ExperimentConfig, train: &Dataset, test: &Dataset) -> Result<ExperimentRecord> {
    config.validate()?;
    let prepared = prepare(train, test, config.pca_target())?;
    Ok(run_prepared(config, &prepared)?.record)
}

/// Direct linear regression on the reduced inputs:
/// `argmax(T_train X'_train^+ x')` for every test sample.
pub fn linear_baseline(prepared: &PreparedData) -> Result<Evaluation> {
    let targets = TargetMatrix::from_labels(&prepared.train.labels, prepared.n_classes)?;
    // X' is n_f x N with samples as columns
    let pinv = pseudoinverse(prepared.train.x.t())?;
    let w = targets.matrix().dot(&pinv);
    let scores = prepared.test.x.dot(&w.t());
    let predictions = classify_rows(scores.view());
    let test_targets = TargetMatrix::from_labels(&prepared.test.labels, prepared.n_classes)?;
    Ok(Evaluation {
        accuracy: accuracy(&predictions, &prepared.test.labels),
        nrmse: nrmse(scores.t(), &test_targets)?,
        predictions,
        scores,
    })
}
