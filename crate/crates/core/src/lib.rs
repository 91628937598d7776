//! Echo-state-network image classifier whose reservoir nodes are spin-torque
//! vortex oscillators, modelled by a closed-form delay-step propagator.
//!
//! Pipeline: IDX images → PCA → random mask → drive current → reservoir
//! states → linear readout trained by pseudoinverse.

// `!(x > 0.0)` is used deliberately so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

// link the BLAS/LAPACK backend
extern crate blas_src;
extern crate openblas_src;

pub mod bench;
pub mod data;
pub mod ddtea;
pub mod error;
pub mod linalg;
pub mod preprocess;
pub mod readout;

pub use bench::{ExperimentConfig, ExperimentRecord, ModelArtifact};
pub use data::{intraclass_variance, one_hot, Dataset, DatasetKind, Split, VarianceConvention};
pub use ddtea::{run_reservoir, step, ActivationKind, Coefficients, CoreState, StvoConfig};
pub use error::{Error, ErrorClass, Result};
pub use preprocess::{fit_pca, generate_mask, to_current, MaskSpec, PcaModel, PcaTarget, RandomMask, ScaleStats};
pub use readout::{pseudoinverse, train_readout, GramAccumulator, ReadoutWeights, TargetMatrix};
