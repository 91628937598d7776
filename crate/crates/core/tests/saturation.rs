//! With the identity activation and `n_theta >= n_f` the reservoir is an
//! injective linear map of the reduced inputs, so the trained readout
//! reproduces plain linear regression on those inputs for every mask.

use ndarray::{Array2, ArrayView1, Axis};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stvo_esn::bench::{linear_baseline, prepare, run_seed, PreparedData};
use stvo_esn::{ActivationKind, Dataset, DatasetKind, ExperimentConfig, PcaTarget};

/// Class-dependent pixel templates plus uniform noise.
fn synthetic(n: usize, n_pixels: usize, n_classes: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let templates = Array2::from_shape_fn((n_classes, n_pixels), |_| rng.gen_range(20.0f64..200.0));
    let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n_classes)).collect();
    let images = Array2::from_shape_fn((n, n_pixels), |(i, p)| {
        (templates[[labels[i], p]] + rng.gen_range(-50.0..50.0)).clamp(0.0, 255.0) as u8
    });
    Dataset::new(images, labels, n_classes, "synthetic").unwrap()
}

/// Gap between the two best scores.
fn margin(row: ArrayView1<'_, f64>) -> f64 {
    let mut v: Vec<f64> = row.to_vec();
    v.sort_by(|a, b| b.total_cmp(a));
    v[0] - v[1]
}

fn setup(seed: u64, n_f: usize) -> PreparedData {
    let train = synthetic(300, 40, 4, seed);
    let test = synthetic(120, 40, 4, seed ^ 0xABCD);
    prepare(&train, &test, PcaTarget::Components(n_f)).unwrap()
}

fn check(prepared: &PreparedData, n_theta: usize, mask_seed: u64) -> Result<(), TestCaseError> {
    let base = linear_baseline(prepared).unwrap();
    let mut config = ExperimentConfig::new(DatasetKind::Mnist, n_theta, ActivationKind::Identity);
    config.n_f = Some(prepared.n_f());
    config.mask_seeds = vec![mask_seed];
    let (_, eval) = run_seed(&config, prepared, mask_seed).unwrap();
    let scale = base.scores.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let gap = (&eval.scores - &base.scores).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    prop_assert!(gap <= 1e-8 * scale, "score gap {gap:e} at n_theta {n_theta}");
    for (i, (a, b)) in eval.predictions.iter().zip(&base.predictions).enumerate() {
        if a != b {
            // only an exact tie may be broken differently
            prop_assert!(
                margin(base.scores.index_axis(Axis(0), i)) <= 2.0 * gap,
                "sample {i}: {a} vs {b}"
            );
        }
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn identity_readout_matches_linear_regression(
        data_seed in 0u64..1000,
        n_f in 2usize..12,
        extra in 0usize..60,
        mask_seed in any::<u64>(),
    ) {
        let prepared = setup(data_seed, n_f);
        check(&prepared, n_f + extra, mask_seed)?;
    }
}

#[test]
fn predictions_agree_across_widths_and_masks() {
    let prepared = setup(7, 6);
    let base = linear_baseline(&prepared).unwrap();
    for n_theta in [6, 12, 60] {
        for seed in 0..3 {
            let mut config = ExperimentConfig::new(DatasetKind::Mnist, n_theta, ActivationKind::Identity);
            config.n_f = Some(6);
            let (_, eval) = run_seed(&config, &prepared, seed).unwrap();
            assert_eq!(eval.predictions, base.predictions, "n_theta {n_theta} seed {seed}");
        }
    }
}

#[test]
fn narrow_identity_reservoir_loses_information() {
    let prepared = setup(3, 10);
    let base = linear_baseline(&prepared).unwrap();
    let mut config = ExperimentConfig::new(DatasetKind::Mnist, 1, ActivationKind::Identity);
    config.n_f = Some(10);
    let (narrow, _) = run_seed(&config, &prepared, 0).unwrap();
    assert!(narrow.accuracy < base.accuracy);
}
