use ndarray::{Array1, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::readout::TargetMatrix;

/// Fraction of predictions equal to the labels.
pub fn accuracy(predicted: &[usize], labels: &[usize]) -> f64 {
    assert_eq!(predicted.len(), labels.len());
    if labels.is_empty() {
        return 0.0;
    }
    let hits = predicted.iter().zip(labels).filter(|(p, l)| p == l).count();
    hits as f64 / labels.len() as f64
}

/// `sqrt(<||y - t||^2> / <||t - <t>||^2>)` with means over samples.
///
/// `y` and `t` are `n_classes x n_samples`.
pub fn nrmse(y: ArrayView2<'_, f64>, t: &TargetMatrix) -> Result<f64> {
    let tm = t.matrix();
    if y.dim() != tm.dim() {
        return Err(Error::DimensionMismatch {
            what: "score matrix",
            expected: tm.len(),
            found: y.len(),
        });
    }
    let n = tm.ncols() as f64;
    let mean_t: Array1<f64> = tm.mean_axis(Axis(1)).ok_or(Error::DegenerateTargets)?;
    let mut num = 0.0;
    let mut den = 0.0;
    for (yc, tc) in y.columns().into_iter().zip(tm.columns()) {
        for ((&yv, &tv), &mv) in yc.iter().zip(tc.iter()).zip(mean_t.iter()) {
            num += (yv - tv) * (yv - tv);
            den += (tv - mv) * (tv - mv);
        }
    }
    if !(den > 0.0) {
        return Err(Error::DegenerateTargets);
    }
    Ok(((num / n) / (den / n)).sqrt())
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
