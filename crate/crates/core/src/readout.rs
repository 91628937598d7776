//! One-shot linear readout: pseudoinverse regression, prediction and argmax.
//!
//! Two routes produce the same weights. [`train_readout`] works on an
//! in-memory reservoir matrix through its SVD. [`GramAccumulator`] streams
//! sample blocks into `S S^T` and `T S^T` so the reservoir matrix never has to
//! be held at full size.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use ndarray_linalg::{Cholesky, Diag, JobSvd, SVDDCInto, SolveTriangular, UPLO};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eigh_dc, mirror_upper, syrk_upper_acc};

/// Relative singular-value cutoff of [`pseudoinverse`].
pub const PINV_RTOL: f64 = 1e-10;

/// Relative eigenvalue cutoff on the Gram matrix. Eigenvalues are squared
/// singular values; below roughly `n * eps` of the largest they are roundoff.
pub const GRAM_RTOL: f64 = 1e-12;

/// One-hot targets, `n_classes x n_samples`.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetMatrix {
    t: Array2<f64>,
}

impl TargetMatrix {
    /// Wraps a matrix after checking that every column is one-hot.
    pub fn new(t: Array2<f64>) -> Result<Self> {
        for (j, col) in t.columns().into_iter().enumerate() {
            let ones = col.iter().filter(|&&v| v == 1.0).count();
            let zeros = col.iter().filter(|&&v| v == 0.0).count();
            if ones != 1 || ones + zeros != col.len() {
                return Err(Error::DegenerateData(format!("target column {j} is not one-hot")));
            }
        }
        Ok(Self { t })
    }

    pub fn from_labels(labels: &[usize], n_classes: usize) -> Result<Self> {
        let mut t = Array2::zeros((n_classes, labels.len()));
        for (j, &label) in labels.iter().enumerate() {
            if label >= n_classes {
                return Err(Error::LabelOutOfRange { label, n_classes });
            }
            t[[label, j]] = 1.0;
        }
        Ok(Self { t })
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.t
    }

    pub fn n_classes(&self) -> usize {
        self.t.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.t.ncols()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.t
            .columns()
            .into_iter()
            .map(|c| c.iter().position(|&v| v == 1.0).unwrap_or(0))
            .collect()
    }
}

/// Learned output matrix `W_out` (`n_classes x n_theta`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadoutWeights {
    pub w_out: Array2<f64>,
    pub ridge_lambda: f64,
}

impl ReadoutWeights {
    pub fn n_classes(&self) -> usize {
        self.w_out.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.w_out.ncols()
    }

    pub fn is_finite(&self) -> bool {
        self.w_out.iter().all(|v| v.is_finite())
    }
}

/// Moore-Penrose pseudoinverse via SVD with the default relative cutoff.
pub fn pseudoinverse(a: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    pseudoinverse_with(a, PINV_RTOL)
}

/// Moore-Penrose pseudoinverse; singular values below `rtol * sigma_max` are dropped.
pub fn pseudoinverse_with(a: ArrayView2<'_, f64>, rtol: f64) -> Result<Array2<f64>> {
    let (m, n) = a.dim();
    if m == 0 || n == 0 {
        return Ok(Array2::zeros((n, m)));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalFailure("pseudoinverse of a non-finite matrix".into()));
    }
    let (u, sigma, vt) = a.to_owned().svddc_into(JobSvd::Some)?;
    let (u, vt) = match (u, vt) {
        (Some(u), Some(vt)) => (u, vt),
        _ => return Err(Error::NumericalFailure("SVD did not return singular vectors".into())),
    };
    let cutoff = rtol * sigma.iter().copied().fold(0.0, f64::max);
    // A^+ = V diag(1/sigma) U^T over the retained singular triplets
    let mut v_scaled = vt.t().to_owned();
    for (k, mut col) in v_scaled.columns_mut().into_iter().enumerate() {
        let s = sigma[k];
        let inv = if s > cutoff && s > 0.0 { 1.0 / s } else { 0.0 };
        col.mapv_inplace(|x| x * inv);
    }
    Ok(v_scaled.dot(&u.t()))
}

/// Trains `W_out` from an `n_theta x n_samples` reservoir matrix.
///
/// `ridge_lambda == 0` gives `T S^+`; otherwise `T S^T (S S^T + lambda I)^-1`.
pub fn train_readout(
    s_train: ArrayView2<'_, f64>,
    t_train: &TargetMatrix,
    ridge_lambda: f64,
) -> Result<ReadoutWeights> {
    if s_train.ncols() != t_train.n_samples() {
        return Err(Error::DimensionMismatch {
            what: "training sample count",
            expected: t_train.n_samples(),
            found: s_train.ncols(),
        });
    }
    if !(ridge_lambda >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "ridge_lambda must be >= 0, got {ridge_lambda}"
        )));
    }
    let w_out = if ridge_lambda == 0.0 {
        t_train.matrix().dot(&pseudoinverse(s_train)?)
    } else {
        let mut gram = s_train.dot(&s_train.t());
        gram.diag_mut().mapv_inplace(|v| v + ridge_lambda);
        let cross = t_train.matrix().dot(&s_train.t());
        solve_spd_right(&gram, &cross)?
    };
    let weights = ReadoutWeights { w_out, ridge_lambda };
    if !weights.is_finite() {
        return Err(Error::NumericalFailure("readout weights are not finite".into()));
    }
    Ok(weights)
}

/// Solves `X A = B` for symmetric positive-definite `A` via Cholesky.
fn solve_spd_right(a: &Array2<f64>, b: &Array2<f64>) -> Result<Array2<f64>> {
    let l = a.cholesky(UPLO::Lower)?;
    // A X^T = B^T  ->  L Y = B^T, L^T X^T = Y
    let y = l.solve_triangular(UPLO::Lower, Diag::NonUnit, &b.t().to_owned())?;
    let xt = l.t().to_owned().solve_triangular(UPLO::Upper, Diag::NonUnit, &y)?;
    Ok(xt.t().to_owned())
}

/// `y = W_out s`.
pub fn predict(w: &ReadoutWeights, s: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
    if s.len() != w.n_features() {
        return Err(Error::DimensionMismatch {
            what: "reservoir output length",
            expected: w.n_features(),
            found: s.len(),
        });
    }
    Ok(w.w_out.dot(&s))
}

/// Scores for every row of `features` (`n_rows x n_theta`), returned `n_rows x n_classes`.
pub fn predict_batch(w: &ReadoutWeights, features: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    if features.ncols() != w.n_features() {
        return Err(Error::DimensionMismatch {
            what: "reservoir output length",
            expected: w.n_features(),
            found: features.ncols(),
        });
    }
    Ok(features.dot(&w.w_out.t()))
}

/// Index of the largest score; the lowest index wins ties.
pub fn classify(y: ArrayView1<'_, f64>) -> usize {
    let mut best = 0;
    for (i, &v) in y.iter().enumerate().skip(1) {
        if v > y[best] {
            best = i;
        }
    }
    best
}

/// Row-wise [`classify`].
pub fn classify_rows(scores: ArrayView2<'_, f64>) -> Vec<usize> {
    scores.axis_iter(Axis(0)).map(classify).collect()
}

/// Streaming accumulation of `S S^T` and `T S^T` over sample blocks.
///
/// With `ridge_lambda == 0` the features are first passed through the
/// invertible map `P = I - (1 - delta)/n 11^T`, which shrinks their common
/// mode by `delta`. For a full-row-rank reservoir matrix
/// `T (PS)^+ P = T S^+`, so predictions are unchanged while the Gram matrix
/// loses the huge eigenvalue that a near-constant offset (such as the STVO
/// steady state) would otherwise put next to the informative ones. `delta` is
/// the ratio of within-sample spread to common level, measured on the first block.
#[derive(Debug, Clone)]
pub struct GramAccumulator {
    gram: Array2<f64>,
    cross: Array2<f64>,
    ridge_lambda: f64,
    deflation: Option<f64>,
    auto_deflate: bool,
    samples: usize,
}

impl GramAccumulator {
    pub fn new(n_features: usize, n_classes: usize, ridge_lambda: f64) -> Result<Self> {
        if !(ridge_lambda >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "ridge_lambda must be >= 0, got {ridge_lambda}"
            )));
        }
        Ok(Self {
            gram: Array2::zeros((n_features, n_features)),
            cross: Array2::zeros((n_classes, n_features)),
            ridge_lambda,
            deflation: None,
            auto_deflate: ridge_lambda == 0.0,
            samples: 0,
        })
    }

    /// Disables the common-mode preconditioning (plain `S S^T`).
    pub fn without_deflation(mut self) -> Self {
        self.auto_deflate = false;
        self
    }

    pub fn n_features(&self) -> usize {
        self.gram.nrows()
    }

    pub fn n_classes(&self) -> usize {
        self.cross.nrows()
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn deflation(&self) -> Option<f64> {
        self.deflation
    }

    /// Adds a block of samples: `features` is `rows x n_features`, one label per row.
    pub fn push(&mut self, features: ArrayView2<'_, f64>, labels: &[usize]) -> Result<()> {
        let (rows, n) = features.dim();
        if n != self.n_features() {
            return Err(Error::DimensionMismatch {
                what: "reservoir output length",
                expected: self.n_features(),
                found: n,
            });
        }
        if labels.len() != rows {
            return Err(Error::CountMismatch {
                images: rows,
                labels: labels.len(),
            });
        }
        if rows == 0 {
            return Ok(());
        }
        let delta = match self.deflation {
            Some(d) => d,
            None => {
                let d = if self.auto_deflate {
                    common_mode_ratio(features)
                } else {
                    1.0
                };
                self.deflation = Some(d);
                d
            }
        };

        let n_classes = self.n_classes();
        if delta < 1.0 {
            let shrink = 1.0 - delta;
            let mut block = features.to_owned();
            for mut row in block.rows_mut() {
                let mean = row.mean().unwrap_or(0.0);
                row.mapv_inplace(|v| v - shrink * mean);
            }
            accumulate(&mut self.gram, &mut self.cross, block.view(), labels, n_classes)?;
        } else {
            accumulate(&mut self.gram, &mut self.cross, features, labels, n_classes)?;
        }
        self.samples += rows;
        Ok(())
    }

    /// Solves for the readout weights, expressed on the raw (untransformed) features.
    pub fn finish(self) -> Result<ReadoutWeights> {
        let n = self.n_features();
        let mut gram = self.gram;
        mirror_upper(&mut gram);
        let w = if self.ridge_lambda > 0.0 {
            gram.diag_mut().mapv_inplace(|v| v + self.ridge_lambda);
            solve_spd_right(&gram, &self.cross)?
        } else {
            let (eigenvalues, vectors) = eigh_dc(gram)?;
            let top = eigenvalues.iter().copied().fold(0.0, f64::max);
            let cutoff = GRAM_RTOL * top;
            // W' = R V diag(1/lambda) V^T over retained eigenpairs
            let rv = self.cross.dot(&vectors);
            let mut scaled = rv;
            for (k, mut col) in scaled.columns_mut().into_iter().enumerate() {
                let l = eigenvalues[k];
                let inv = if l > cutoff && top > 0.0 { 1.0 / l } else { 0.0 };
                col.mapv_inplace(|x| x * inv);
            }
            let mut w = scaled.dot(&vectors.t());
            if let Some(delta) = self.deflation.filter(|&d| d < 1.0) {
                // W = W' P = W' - (1 - delta)/n (W' 1) 1^T
                let shrink = (1.0 - delta) / n as f64;
                for mut row in w.rows_mut() {
                    let total = row.sum();
                    row.mapv_inplace(|v| v - shrink * total);
                }
            }
            w
        };
        let weights = ReadoutWeights {
            w_out: w,
            ridge_lambda: self.ridge_lambda,
        };
        if !weights.is_finite() {
            return Err(Error::NumericalFailure("readout weights are not finite".into()));
        }
        Ok(weights)
    }
}

fn accumulate(
    gram: &mut Array2<f64>,
    cross: &mut Array2<f64>,
    block: ArrayView2<'_, f64>,
    labels: &[usize],
    n_classes: usize,
) -> Result<()> {
    syrk_upper_acc(gram, block);
    for (row, &label) in block.rows().into_iter().zip(labels) {
        if label >= n_classes {
            return Err(Error::LabelOutOfRange { label, n_classes });
        }
        let mut target = cross.row_mut(label);
        target += &row;
    }
    Ok(())
}

/// Ratio of within-sample spread to the common level of a feature block,
/// clamped to `[1e-6, 1]`.
fn common_mode_ratio(block: ArrayView2<'_, f64>) -> f64 {
    let mut level = 0.0;
    let mut spread = 0.0;
    for row in block.rows() {
        let mean = row.mean().unwrap_or(0.0);
        level += mean * mean;
        spread += row.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / row.len() as f64;
    }
    if !(level > 0.0) {
        return 1.0;
    }
    (spread / level).sqrt().clamp(1e-6, 1.0)
}
