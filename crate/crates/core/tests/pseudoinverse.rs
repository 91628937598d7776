//! Moore-Penrose conditions and agreement between the two readout routes.

mod common;

use common::{fro, penrose_suite, uniform};
use ndarray::{array, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stvo_esn::readout::{classify_rows, predict_batch};
use stvo_esn::{pseudoinverse, train_readout, GramAccumulator, TargetMatrix};

#[test]
fn penrose_conditions_hold_on_fifty_matrices() {
    penrose_suite(50, 20).unwrap();
}

/// Solves `M X = B` by Gauss-Jordan elimination with partial pivoting.
fn solve(mut m: Array2<f64>, mut b: Array2<f64>) -> Array2<f64> {
    let n = m.nrows();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&x, &y| m[[x, col]].abs().total_cmp(&m[[y, col]].abs()))
            .unwrap();
        for k in 0..n {
            m.swap([col, k], [piv, k]);
        }
        for k in 0..b.ncols() {
            b.swap([col, k], [piv, k]);
        }
        let d = m[[col, col]];
        for row in 0..n {
            if row == col {
                continue;
            }
            let f = m[[row, col]] / d;
            for k in 0..n {
                m[[row, k]] -= f * m[[col, k]];
            }
            for k in 0..b.ncols() {
                b[[row, k]] -= f * b[[col, k]];
            }
        }
    }
    for row in 0..n {
        let d = m[[row, row]];
        b.row_mut(row).mapv_inplace(|v| v / d);
    }
    b
}

#[test]
fn full_column_rank_matches_normal_equations() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..10 {
        let a = uniform(&mut rng, 30, 7);
        let oracle = solve(a.t().dot(&a), a.t().to_owned());
        let p = pseudoinverse(a.view()).unwrap();
        assert!(fro(&(p - &oracle)) <= 1e-10 * fro(&oracle));
    }
}

#[test]
fn hand_computed_cases() {
    let a = array![[2.0, 0.0], [0.0, 0.0]];
    let p = pseudoinverse(a.view()).unwrap();
    assert!(fro(&(p - array![[0.5, 0.0], [0.0, 0.0]])) < 1e-15);
    // a column vector inverts to v^T / |v|^2
    let v = array![[3.0], [4.0]];
    let p = pseudoinverse(v.view()).unwrap();
    assert!(fro(&(p - array![[0.12, 0.16]])) < 1e-15);
    let z = Array2::<f64>::zeros((3, 2));
    assert_eq!(pseudoinverse(z.view()).unwrap(), Array2::<f64>::zeros((2, 3)));
}

#[test]
fn gram_route_matches_svd_route() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let (n_samples, n_features, n_classes) = (400, 25, 4);
    let labels: Vec<usize> = (0..n_samples).map(|i| i % n_classes).collect();
    let mut x = uniform(&mut rng, n_samples, n_features);
    for (mut row, &l) in x.axis_iter_mut(Axis(0)).zip(&labels) {
        row[l] += 1.5;
    }
    let t = TargetMatrix::from_labels(&labels, n_classes).unwrap();
    let svd = train_readout(x.t(), &t, 0.0).unwrap();

    let mut acc = GramAccumulator::new(n_features, n_classes, 0.0)
        .unwrap()
        .without_deflation();
    for (chunk, lab) in x.axis_chunks_iter(Axis(0), 64).zip(labels.chunks(64)) {
        acc.push(chunk, lab).unwrap();
    }
    let gram = acc.finish().unwrap();
    let diff = fro(&(&gram.w_out - &svd.w_out));
    assert!(diff <= 1e-9 * fro(&svd.w_out), "weight gap {diff:e}");
    let a = classify_rows(predict_batch(&svd, x.view()).unwrap().view());
    let b = classify_rows(predict_batch(&gram, x.view()).unwrap().view());
    assert_eq!(a, b);
}

#[test]
fn deflated_gram_route_matches_svd_route_under_a_common_offset() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let (n_samples, n_features, n_classes) = (500, 30, 5);
    let labels: Vec<usize> = (0..n_samples).map(|i| (i * 7) % n_classes).collect();
    let mut x = uniform(&mut rng, n_samples, n_features).mapv(|v| 0.99 + 1e-3 * v);
    for (mut row, &l) in x.axis_iter_mut(Axis(0)).zip(&labels) {
        row[l] += 2e-3;
    }
    let t = TargetMatrix::from_labels(&labels, n_classes).unwrap();
    let svd = train_readout(x.t(), &t, 0.0).unwrap();
    let mut acc = GramAccumulator::new(n_features, n_classes, 0.0).unwrap();
    for (chunk, lab) in x.axis_chunks_iter(Axis(0), 100).zip(labels.chunks(100)) {
        acc.push(chunk, lab).unwrap();
    }
    assert!(acc.deflation().unwrap() < 0.1);
    let gram = acc.finish().unwrap();
    let ys = predict_batch(&svd, x.view()).unwrap();
    let yg = predict_batch(&gram, x.view()).unwrap();
    assert!(
        fro(&(&ys - &yg)) <= 1e-6 * fro(&ys),
        "score gap {:e}",
        fro(&(&ys - &yg))
    );
    assert_eq!(classify_rows(ys.view()), classify_rows(yg.view()));
}
