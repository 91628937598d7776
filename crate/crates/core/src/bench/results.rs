use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::pipeline::ExperimentRecord;
use crate::error::{Error, Result};

pub const RESULTS_SCHEMA_VERSION: u32 = 1;

pub const CSV_COLUMNS: [&str; 7] = [
    "dataset",
    "activation",
    "n_theta",
    "seed",
    "accuracy",
    "nrmse",
    "wall_ms",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResultFormat {
    Csv,
    Json,
}

impl FromStr for ResultFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ResultFormat::Csv),
            "json" => Ok(ResultFormat::Json),
            other => Err(Error::InvalidConfig(format!("unknown result format '{other}'"))),
        }
    }
}

impl ResultFormat {
    /// Guesses the format from a file extension.
    pub fn from_path(path: &Path) -> Option<Self> {
        path.extension()?.to_str()?.parse().ok()
    }
}

/// One per-seed line of the flat CSV view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub dataset: String,
    pub activation: String,
    pub n_theta: usize,
    pub seed: u64,
    pub accuracy: f64,
    pub nrmse: f64,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsFile {
    pub schema_version: u32,
    pub records: Vec<ExperimentRecord>,
}

pub fn rows(records: &[ExperimentRecord]) -> Vec<ResultRow> {
    records
        .iter()
        .flat_map(|r| {
            r.per_seed.iter().map(move |s| ResultRow {
                dataset: r.config.dataset.name().to_string(),
                activation: r.config.activation.name().to_string(),
                n_theta: r.config.n_theta,
                seed: s.seed,
                accuracy: s.accuracy,
                nrmse: s.nrmse,
                wall_ms: s.wall_ms,
            })
        })
        .collect()
}

pub fn write_csv(rows: &[ResultRow], out: impl std::io::Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for row in rows {
        w.write_record([
            row.dataset.clone(),
            row.activation.clone(),
            row.n_theta.to_string(),
            row.seed.to_string(),
            // shortest representation that parses back to the same f64
            row.accuracy.to_string(),
            row.nrmse.to_string(),
            row.wall_ms.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(input: impl std::io::Read) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != CSV_COLUMNS {
        return Err(Error::Serialization(format!("unexpected CSV header {header:?}")));
    }
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Writes `records` as CSV (flat per-seed rows) or JSON (full records).
pub fn export_results(records: &[ExperimentRecord], path: &Path, format: ResultFormat) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    match format {
        ResultFormat::Csv => {
            let f = fs::File::create(path)?;
            write_csv(&rows(records), std::io::BufWriter::new(f))
        }
        ResultFormat::Json => {
            let file = ResultsFile {
                schema_version: RESULTS_SCHEMA_VERSION,
                records: records.to_vec(),
            };
            fs::write(path, serde_json::to_string_pretty(&file)?)?;
            Ok(())
        }
    }
}

pub fn import_results_json(path: &Path) -> Result<Vec<ExperimentRecord>> {
    let file: ResultsFile = serde_json::from_slice(&fs::read(path)?)?;
    if file.schema_version != RESULTS_SCHEMA_VERSION {
        return Err(Error::Serialization(format!(
            "results schema {} is not supported (expected {RESULTS_SCHEMA_VERSION})",
            file.schema_version
        )));
    }
    Ok(file.records)
}

pub fn import_results_csv(path: &Path) -> Result<Vec<ResultRow>> {
    read_csv(fs::File::open(path)?)
}
