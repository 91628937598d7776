use std::fs::{self, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use log::info;

use super::config::ExperimentConfig;
use super::pipeline::{run_prepared, ExperimentRecord, PreparedData};
use crate::ddtea::ActivationKind;
use crate::error::{Error, Result};

/// Runs the cross-product of `n_theta_values` and `activations` on shared
/// seeds. With a `store`, every finished cell is appended to it as one JSON
/// line and cells already present there are reused instead of recomputed, so
/// an interrupted sweep resumes where it stopped.
pub fn sweep(
    base: &ExperimentConfig,
    n_theta_values: &[usize],
    activations: &[ActivationKind],
    prepared: &PreparedData,
    store: Option<&Path>,
) -> Result<Vec<ExperimentRecord>> {
    if n_theta_values.is_empty() || activations.is_empty() {
        return Err(Error::InvalidConfig(
            "sweep needs at least one n_theta and one activation".into(),
        ));
    }
    if n_theta_values.contains(&0) {
        return Err(Error::InvalidConfig("n_theta values must be positive".into()));
    }
    if n_theta_values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidConfig(
            "n_theta values must be strictly increasing".into(),
        ));
    }
    let mut done = match store {
        Some(path) if path.exists() => {
            let records = load_jsonl(path)?;
            // drop any partial trailing line before appending to the file again
            rewrite_jsonl(path, &records)?;
            records
        }
        _ => Vec::new(),
    };
    let mut out = Vec::new();
    for &activation in activations {
        for &n_theta in n_theta_values {
            let mut config = base.clone();
            config.n_theta = n_theta;
            config.activation = activation;
            if let Some(pos) = done.iter().position(|r| r.config == config && r.n_f == prepared.n_f()) {
                info!("{activation} n_theta={n_theta}: reusing stored record");
                out.push(done.swap_remove(pos));
                continue;
            }
            let record = run_prepared(&config, prepared)
                .map_err(|e| e.context(format!("sweep cell {activation} n_theta={n_theta}")))?
                .record;
            if let Some(path) = store {
                append_jsonl(path, &record)?;
            }
            out.push(record);
        }
    }
    Ok(out)
}

pub fn append_jsonl(path: &Path, record: &ExperimentRecord) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    let line = serde_json::to_string(record)?;
    writeln!(f, "{line}")?;
    f.flush()?;
    Ok(())
}

fn rewrite_jsonl(path: &Path, records: &[ExperimentRecord]) -> Result<()> {
    let mut text = String::new();
    for r in records {
        text.push_str(&serde_json::to_string(r)?);
        text.push('\n');
    }
    let tmp = path.with_extension("jsonl.tmp");
    fs::write(&tmp, text)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Reads the records of a JSON-lines store. A truncated final line (from an
/// interrupted write) is ignored.
pub fn load_jsonl(path: &Path) -> Result<Vec<ExperimentRecord>> {
    let f = fs::File::open(path)?;
    let lines: Vec<String> = BufReader::new(f).lines().collect::<std::io::Result<_>>()?;
    let mut out = Vec::new();
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(r) => out.push(r),
            Err(_) if i + 1 == lines.len() => break,
            Err(e) => return Err(Error::from(e).context(format!("{}:{}", path.display(), i + 1))),
        }
    }
    Ok(out)
}
