use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2};
use ndarray_linalg::{Eigh, UPLO};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const BLOCK_ROWS: usize = 4096;

/// How many principal directions to keep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PcaTarget {
    /// Smallest count whose cumulative explained-variance ratio reaches the fraction.
    VarianceRatio(f64),
    Components(usize),
}

/// Mean-centred principal component projection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    /// Training-set mean, length `n_i`.
    pub mean: Array1<f64>,
    /// `n_f x n_i`, orthonormal rows, leading direction first.
    pub components: Array2<f64>,
    /// Per-component variance, non-increasing.
    pub explained_variance: Array1<f64>,
    /// Sum of all covariance eigenvalues (including discarded ones).
    pub total_variance: f64,
}

/// Fits PCA on the rows of `x` (one flattened image per row).
///
/// Uses the eigendecomposition of the `n_i x n_i` sample covariance,
/// accumulated in row blocks so integer pixel data need not be widened at once.
pub fn fit_pca<A>(x: ArrayView2<'_, A>, target: PcaTarget) -> Result<PcaModel>
where
    A: Copy + Into<f64>,
{
    let (n_rows, n_i) = x.dim();
    if n_rows < 2 {
        return Err(Error::DegenerateData(format!("PCA needs >= 2 rows, got {n_rows}")));
    }
    match target {
        PcaTarget::VarianceRatio(r) if !(r > 0.0 && r <= 1.0) => {
            return Err(Error::InvalidConfig(format!("variance target {r} outside (0, 1]")));
        }
        PcaTarget::Components(0) => {
            return Err(Error::InvalidConfig("n_components must be >= 1".into()));
        }
        PcaTarget::Components(k) if k > n_i => {
            return Err(Error::InvalidConfig(format!(
                "n_components = {k} exceeds input dimension {n_i}"
            )));
        }
        _ => {}
    }

    let mut mean = Array1::<f64>::zeros(n_i);
    for row in x.rows() {
        for (m, &v) in mean.iter_mut().zip(row.iter()) {
            *m += v.into();
        }
    }
    mean /= n_rows as f64;

    let mut scatter = Array2::<f64>::zeros((n_i, n_i));
    let mut block = Array2::<f64>::zeros((BLOCK_ROWS.min(n_rows), n_i));
    let mut start = 0;
    while start < n_rows {
        let end = (start + BLOCK_ROWS).min(n_rows);
        let rows = end - start;
        let mut b = block.slice_mut(s![..rows, ..]);
        for (mut dst, src) in b.rows_mut().into_iter().zip(x.slice(s![start..end, ..]).rows()) {
            for ((d, &v), &m) in dst.iter_mut().zip(src.iter()).zip(mean.iter()) {
                *d = v.into() - m;
            }
        }
        ndarray::linalg::general_mat_mul(1.0, &b.t(), &b, 1.0, &mut scatter);
        start = end;
    }
    let covariance = scatter / (n_rows - 1) as f64;

    let (eigenvalues, eigenvectors) = covariance.eigh(UPLO::Upper)?;
    // eigh returns ascending order
    let variances: Vec<f64> = eigenvalues.iter().rev().map(|&v| v.max(0.0)).collect();
    let total_variance: f64 = variances.iter().sum();
    if !(total_variance > 0.0) {
        return Err(Error::DegenerateData("training covariance is identically zero".into()));
    }

    let n_f = match target {
        PcaTarget::Components(k) => k,
        PcaTarget::VarianceRatio(ratio) => {
            let mut acc = 0.0;
            let mut k = variances.len();
            for (i, v) in variances.iter().enumerate() {
                acc += v;
                if acc / total_variance >= ratio {
                    k = i + 1;
                    break;
                }
            }
            k
        }
    };

    let mut components = Array2::<f64>::zeros((n_f, n_i));
    for (k, mut row) in components.rows_mut().into_iter().enumerate() {
        let col = eigenvectors.column(n_i - 1 - k);
        row.assign(&col);
        // sign convention: largest-magnitude entry positive
        let pivot = row
            .iter()
            .copied()
            .fold(0.0f64, |best, v| if v.abs() > best.abs() { v } else { best });
        if pivot < 0.0 {
            row.mapv_inplace(|v| -v);
        }
    }

    Ok(PcaModel {
        mean,
        components,
        explained_variance: Array1::from(variances[..n_f].to_vec()),
        total_variance,
    })
}

impl PcaModel {
    pub fn n_inputs(&self) -> usize {
        self.mean.len()
    }

    pub fn n_components(&self) -> usize {
        self.components.nrows()
    }

    pub fn explained_variance_ratio(&self) -> Array1<f64> {
        &self.explained_variance / self.total_variance
    }

    pub fn cumulative_ratio(&self) -> f64 {
        self.explained_variance.sum() / self.total_variance
    }

    /// `x' = C (x - mean)`.
    pub fn project(&self, x: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        if x.len() != self.n_inputs() {
            return Err(Error::DimensionMismatch {
                what: "image length",
                expected: self.n_inputs(),
                found: x.len(),
            });
        }
        Ok(self.components.dot(&(&x - &self.mean)))
    }

    /// Projects every row of `x`; returns `n_rows x n_f`.
    pub fn project_batch<A>(&self, x: ArrayView2<'_, A>) -> Result<Array2<f64>>
    where
        A: Copy + Into<f64>,
    {
        if x.ncols() != self.n_inputs() {
            return Err(Error::DimensionMismatch {
                what: "image length",
                expected: self.n_inputs(),
                found: x.ncols(),
            });
        }
        let mut out = Array2::<f64>::zeros((x.nrows(), self.n_components()));
        let mut start = 0;
        while start < x.nrows() {
            let end = (start + BLOCK_ROWS).min(x.nrows());
            let src = x.slice(s![start..end, ..]);
            let mut centred = Array2::<f64>::zeros(src.dim());
            for (mut dst, row) in centred.rows_mut().into_iter().zip(src.rows()) {
                for ((d, &v), &m) in dst.iter_mut().zip(row.iter()).zip(self.mean.iter()) {
                    *d = v.into() - m;
                }
            }
            out.slice_mut(s![start..end, ..])
                .assign(&centred.dot(&self.components.t()));
            start = end;
        }
        Ok(out)
    }

    /// `||(x - mean) - C^T C (x - mean)||`.
    pub fn reconstruction_error(&self, x: ArrayView1<'_, f64>) -> Result<f64> {
        let reduced = self.project(x)?;
        let centred = &x - &self.mean;
        let back = self.components.t().dot(&reduced);
        Ok((&centred - &back).mapv(|v| v * v).sum().sqrt())
    }

    /// Keeps only the first `k` components.
    pub fn truncated(&self, k: usize) -> PcaModel {
        let k = k.min(self.n_components());
        PcaModel {
            mean: self.mean.clone(),
            components: self.components.slice(s![..k, ..]).to_owned(),
            explained_variance: self.explained_variance.slice(s![..k]).to_owned(),
            total_variance: self.total_variance,
        }
    }

    /// `C C^T`, which must be the identity.
    pub fn gram(&self) -> Array2<f64> {
        self.components.dot(&self.components.t())
    }
}
