use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::data::DatasetKind;
use crate::ddtea::{default_interval, ActivationKind, Coefficients, StvoConfig};
use crate::error::{Error, Result};
use crate::preprocess::PcaTarget;

pub const DEFAULT_BLOCK_ROWS: usize = 1000;

/// One experiment: dataset, reservoir width, activation and operating point,
/// repeated over several mask seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetKind,
    /// Data root; each dataset lives in a subdirectory named after it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_dir: Option<PathBuf>,
    pub n_theta: usize,
    pub activation: ActivationKind,
    /// Cumulative explained-variance target for PCA. Ignored when `n_f` is set.
    #[serde(default = "default_variance_target")]
    pub variance_target: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_f: Option<usize>,
    pub stvo: StvoConfig,
    #[serde(default = "default_seeds")]
    pub mask_seeds: Vec<u64>,
    /// If set, `mask_seeds` is replaced by `seed_count` seeds derived from it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub master_seed: Option<u64>,
    #[serde(default = "default_seed_count")]
    pub seed_count: usize,
    #[serde(default)]
    pub ridge_lambda: f64,
    /// Input offset of the sigmoid after scaling `x''` to unit RMS.
    #[serde(default = "default_sigmoid_offset")]
    pub sigmoid_offset: f64,
    /// Images per streamed block.
    #[serde(default = "default_block_rows")]
    pub block_rows: usize,
}

fn default_variance_target() -> f64 {
    0.8
}

fn default_seeds() -> Vec<u64> {
    (0..10).collect()
}

fn default_seed_count() -> usize {
    10
}

fn default_sigmoid_offset() -> f64 {
    1.0
}

fn default_block_rows() -> usize {
    DEFAULT_BLOCK_ROWS
}

impl ExperimentConfig {
    pub fn new(dataset: DatasetKind, n_theta: usize, activation: ActivationKind) -> Self {
        Self {
            dataset,
            data_dir: None,
            n_theta,
            activation,
            variance_target: default_variance_target(),
            n_f: None,
            stvo: StvoConfig::default(),
            mask_seeds: default_seeds(),
            master_seed: None,
            seed_count: default_seed_count(),
            ridge_lambda: 0.0,
            sigmoid_offset: default_sigmoid_offset(),
            block_rows: DEFAULT_BLOCK_ROWS,
        }
    }

    pub fn pca_target(&self) -> PcaTarget {
        match self.n_f {
            Some(k) => PcaTarget::Components(k),
            None => PcaTarget::VarianceRatio(self.variance_target),
        }
    }

    /// Mask seeds after applying `master_seed`, if any.
    pub fn seeds(&self) -> Vec<u64> {
        match self.master_seed {
            Some(master) => derive_seeds(master, self.seed_count),
            None => self.mask_seeds.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_theta == 0 {
            return Err(Error::InvalidConfig("n_theta must be >= 1".into()));
        }
        let seeds = self.seeds();
        if seeds.is_empty() {
            return Err(Error::InvalidConfig("mask_seeds must not be empty".into()));
        }
        let mut sorted = seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != seeds.len() {
            return Err(Error::InvalidConfig("mask_seeds must be distinct".into()));
        }
        match self.n_f {
            Some(0) => return Err(Error::InvalidConfig("n_f must be >= 1".into())),
            None if !(self.variance_target > 0.0 && self.variance_target <= 1.0) => {
                return Err(Error::InvalidConfig(format!(
                    "variance_target must be in (0, 1], got {}",
                    self.variance_target
                )))
            }
            _ => {}
        }
        if !(self.ridge_lambda >= 0.0) {
            return Err(Error::InvalidConfig("ridge_lambda must be >= 0".into()));
        }
        if self.block_rows == 0 {
            return Err(Error::InvalidConfig("block_rows must be >= 1".into()));
        }
        if self.activation == ActivationKind::Stvo {
            self.stvo.validate()?;
        }
        Ok(())
    }

    /// Parses a TOML document, applies `key=value` overrides (dotted keys for
    /// nested tables) and fills `stvo.d_t` with the default interval when absent.
    pub fn from_toml_with_overrides(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut doc: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::InvalidConfig(e.to_string()))?;
        for (key, value) in overrides {
            apply_override(&mut doc, key, value)?;
        }
        Self::from_table(doc)
    }

    pub fn from_table(mut doc: toml::Table) -> Result<Self> {
        // integers are accepted where floats are expected
        for key in ["variance_target", "ridge_lambda", "sigmoid_offset"] {
            int_to_float(&mut doc, key);
        }
        let stvo = doc
            .entry("stvo")
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        let stvo = stvo
            .as_table_mut()
            .ok_or_else(|| Error::InvalidConfig("'stvo' must be a table".into()))?;
        for key in ["j_dc", "amplitude", "d_t"] {
            int_to_float(stvo, key);
        }
        let defaults = StvoConfig::default();
        stvo.entry("j_dc").or_insert(toml::Value::Float(defaults.j_dc));
        stvo.entry("amplitude")
            .or_insert(toml::Value::Float(defaults.amplitude));
        if !stvo.contains_key("d_t") {
            let j_dc = value_as_f64(&stvo["j_dc"]).unwrap_or(defaults.j_dc);
            let coefficients: Coefficients = match stvo.get("coefficients") {
                Some(v) => v
                    .clone()
                    .try_into()
                    .map_err(|e: toml::de::Error| Error::InvalidConfig(e.to_string()))?,
                None => Coefficients::default(),
            };
            stvo.insert("d_t".into(), toml::Value::Float(default_interval(&coefficients, j_dc)));
        }
        let config: ExperimentConfig = toml::Value::Table(doc)
            .try_into()
            .map_err(|e: toml::de::Error| Error::InvalidConfig(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serialization(e.to_string()))
    }
}

fn int_to_float(table: &mut toml::Table, key: &str) {
    if let Some(toml::Value::Integer(i)) = table.get(key) {
        let f = *i as f64;
        table.insert(key.to_string(), toml::Value::Float(f));
    }
}

fn value_as_f64(v: &toml::Value) -> Option<f64> {
    match v {
        toml::Value::Float(f) => Some(*f),
        toml::Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

/// Interprets an override as a TOML value, falling back to a plain string.
fn parse_override_value(raw: &str) -> toml::Value {
    let wrapped = format!("v = {raw}");
    match wrapped.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.to_string())),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Sets `key` (dotted for nested tables) to `raw`, read as a TOML value when
/// it parses as one and as a string otherwise.
pub fn apply_override(doc: &mut toml::Table, key: &str, raw: &str) -> Result<()> {
    set_dotted(doc, key, parse_override_value(raw))
}

fn set_dotted(doc: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts
        .pop()
        .filter(|s| !s.is_empty())
        .ok_or_else(|| Error::InvalidConfig(format!("empty override key '{key}'")))?;
    let mut table = doc;
    for part in parts {
        let entry = table
            .entry(part)
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| Error::InvalidConfig(format!("override '{key}': '{part}' is not a table")))?;
    }
    table.insert(last.to_string(), value);
    Ok(())
}

/// SplitMix64 stream seeded by `master`; the k-th output is the k-th mask seed.
pub fn derive_seeds(master: u64, count: usize) -> Vec<u64> {
    let mut state = master;
    (0..count)
        .map(|_| {
            state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
            let mut z = state;
            z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
            z ^ (z >> 31)
        })
        .collect()
}
