use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::pipeline::{train_readout_streaming, Evaluation, Projected, TrainedReadout};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::preprocess::{fit_pca, PcaModel};

pub const ARTIFACT_SCHEMA_VERSION: u32 = 1;

/// Self-contained trained model: PCA, mask (as seed and shape), input
/// scaling, operating point and readout weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    pub seed: u64,
    pub n_classes: usize,
    pub pca: PcaModel,
    pub readout: TrainedReadout,
}

impl ModelArtifact {
    /// Fits PCA and trains the readout for one mask seed.
    pub fn train(config: &ExperimentConfig, train: &Dataset, seed: u64) -> Result<Self> {
        config.validate()?;
        let pca = fit_pca(train.images.view(), config.pca_target())?;
        let projected = Projected {
            x: pca.project_batch(train.images.view())?,
            labels: train.labels.clone(),
        };
        let readout = train_readout_streaming(config, &projected, train.n_classes, seed)?;
        Ok(Self {
            schema_version: ARTIFACT_SCHEMA_VERSION,
            config: config.clone(),
            seed,
            n_classes: train.n_classes,
            pca,
            readout,
        })
    }

    pub fn n_f(&self) -> usize {
        self.pca.n_components()
    }

    pub fn evaluate(&self, test: &Dataset) -> Result<Evaluation> {
        if test.n_classes != self.n_classes {
            return Err(Error::DimensionMismatch {
                what: "class count",
                expected: self.n_classes,
                found: test.n_classes,
            });
        }
        let projected = Projected {
            x: self.pca.project_batch(test.images.view())?,
            labels: test.labels.clone(),
        };
        self.readout
            .evaluate(&projected, self.n_classes, self.config.block_rows)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::from(e).context(format!("reading {}", path.display())))?;
        let artifact: ModelArtifact = serde_json::from_slice(&bytes)?;
        if artifact.schema_version != ARTIFACT_SCHEMA_VERSION {
            return Err(Error::Serialization(format!(
                "model schema {} is not supported (expected {ARTIFACT_SCHEMA_VERSION})",
                artifact.schema_version
            )));
        }
        Ok(artifact)
    }
}
