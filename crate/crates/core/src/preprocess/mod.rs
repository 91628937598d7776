//! Input encoding: PCA reduction, random-mask expansion and the mapping of
//! masked values onto the oscillator drive current.

mod current;
mod mask;
mod pca;

pub use current::{to_current, ScaleStats, StatsAccumulator};
pub use mask::{generate_mask, MaskSpec, RandomMask, MASK_GENERATOR};
pub use pca::{fit_pca, PcaModel, PcaTarget};
