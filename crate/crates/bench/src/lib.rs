//! Deterministic inputs for the kernel benchmarks.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stvo_esn::StvoConfig;

/// Drive currents around the default bias, as the reservoir sees them.
pub fn drive_signal(len: usize, seed: u64) -> Vec<f64> {
    let config = StvoConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len)
        .map(|_| config.j_dc + config.amplitude * rng.gen_range(-1.0..1.0))
        .collect()
}

/// Uniform `rows x cols` block in `[lo, hi)`.
pub fn uniform_block(rows: usize, cols: usize, lo: f64, hi: f64, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_fn((rows, cols), |_| rng.gen_range(lo..hi))
}

/// Cyclic labels `0, 1, .., n_classes - 1, 0, ..`.
pub fn cyclic_labels(len: usize, n_classes: usize) -> Vec<usize> {
    (0..len).map(|i| i % n_classes).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inputs_are_deterministic_and_in_range() {
        let a = drive_signal(100, 1);
        assert_eq!(a, drive_signal(100, 1));
        assert!(a.iter().all(|&j| (6.5..=7.5).contains(&j)));
        let b = uniform_block(3, 4, 0.9, 1.0, 2);
        assert!(b.iter().all(|&v| (0.9..1.0).contains(&v)));
        assert_eq!(cyclic_labels(5, 2), vec![0, 1, 0, 1, 0]);
    }
}
