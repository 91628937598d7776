use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Identifier of the generator and float mapping used for mask entries.
/// Bump it if either ever changes.
pub const MASK_GENERATOR: &str = "chacha8-u53-v1";

/// Fixed random input mask `M` (`n_theta x n_f`), entries uniform in `[-1, 1)`.
///
/// Serializes as its seed and shape only; deserializing regenerates the matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomMask {
    pub matrix: Array2<f64>,
    pub seed: u64,
}

/// Serialized form of a [`RandomMask`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskSpec {
    pub generator: String,
    pub seed: u64,
    pub n_theta: usize,
    pub n_f: usize,
}

/// Draws an `n_theta x n_f` mask, row-major, one 64-bit word per entry.
pub fn generate_mask(n_theta: usize, n_f: usize, seed: u64) -> RandomMask {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let matrix = Array2::from_shape_simple_fn((n_theta, n_f), || {
        // top 53 bits -> [0, 1), then affine to [-1, 1)
        let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        2.0 * u - 1.0
    });
    RandomMask { matrix, seed }
}

impl RandomMask {
    pub fn n_theta(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_f(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn spec(&self) -> MaskSpec {
        MaskSpec {
            generator: MASK_GENERATOR.to_string(),
            seed: self.seed,
            n_theta: self.n_theta(),
            n_f: self.n_f(),
        }
    }

    pub fn from_spec(spec: &MaskSpec) -> Result<Self> {
        if spec.generator != MASK_GENERATOR {
            return Err(Error::Serialization(format!(
                "unsupported mask generator '{}' (expected '{MASK_GENERATOR}')",
                spec.generator
            )));
        }
        Ok(generate_mask(spec.n_theta, spec.n_f, spec.seed))
    }

    /// `x'' = M x'`.
    pub fn encode(&self, x_prime: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        if x_prime.len() != self.n_f() {
            return Err(Error::DimensionMismatch {
                what: "reduced vector",
                expected: self.n_f(),
                found: x_prime.len(),
            });
        }
        Ok(self.matrix.dot(&x_prime))
    }

    /// Row-wise encoding of `n_rows x n_f` into `n_rows x n_theta`.
    pub fn encode_batch(&self, x_prime: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if x_prime.ncols() != self.n_f() {
            return Err(Error::DimensionMismatch {
                what: "reduced vector",
                expected: self.n_f(),
                found: x_prime.ncols(),
            });
        }
        Ok(x_prime.dot(&self.matrix.t()))
    }
}

impl Serialize for RandomMask {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.spec().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for RandomMask {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let spec = MaskSpec::deserialize(deserializer)?;
        RandomMask::from_spec(&spec).map_err(serde::de::Error::custom)
    }
}
