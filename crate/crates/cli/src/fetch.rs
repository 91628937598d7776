use std::fs;
use std::io::Read;
use std::path::Path;

use anyhow::{bail, Context, Result};
use flate2::read::GzDecoder;
use serde::Deserialize;

use crate::errors::DataError;
use crate::manifest::sha256_hex;

pub const BUILTIN_MIRRORS: &str = include_str!("mirrors.toml");

#[derive(Debug, Deserialize)]
pub struct MirrorList {
    #[serde(default)]
    pub file: Vec<MirrorEntry>,
}

#[derive(Debug, Deserialize)]
pub struct MirrorEntry {
    pub dataset: String,
    pub name: String,
    pub sha256: Option<String>,
    pub urls: Vec<String>,
}

pub fn parse_mirrors(text: &str) -> Result<MirrorList> {
    toml::from_str(text).context("parsing mirror list")
}

fn maybe_gunzip(bytes: Vec<u8>) -> Result<Vec<u8>> {
    if bytes.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(bytes.as_slice())
            .read_to_end(&mut out)
            .context("decompressing download")?;
        Ok(out)
    } else {
        Ok(bytes)
    }
}

fn download(url: &str) -> Result<Vec<u8>> {
    let resp = reqwest::blocking::get(url).with_context(|| format!("GET {url}"))?;
    if !resp.status().is_success() {
        bail!("GET {url}: HTTP {}", resp.status());
    }
    Ok(resp.bytes()?.to_vec())
}

/// Fetches every entry of `list` (optionally limited to one dataset) into
/// `root/<dataset>/<name>`. Existing files with a matching checksum are kept.
pub fn fetch(list: &MirrorList, dataset: Option<&str>, root: &Path) -> Result<()> {
    let entries: Vec<&MirrorEntry> = list
        .file
        .iter()
        .filter(|e| dataset.map_or(true, |d| e.dataset == d))
        .collect();
    if entries.is_empty() {
        return Err(DataError(format!("no mirror entries for dataset '{}'", dataset.unwrap_or("*"))).into());
    }
    for entry in entries {
        let target = root.join(&entry.dataset).join(&entry.name);
        if target.is_file() {
            let existing = fs::read(&target)?;
            let hash = sha256_hex(&existing);
            match &entry.sha256 {
                Some(want) if *want != hash => {
                    log::warn!("{}: checksum mismatch, downloading again", target.display())
                }
                _ => {
                    println!("{}: present ({hash})", target.display());
                    continue;
                }
            }
        }
        let mut last_err = None;
        let mut done = false;
        for url in &entry.urls {
            match download(url).and_then(maybe_gunzip) {
                Ok(bytes) => {
                    let hash = sha256_hex(&bytes);
                    if let Some(want) = &entry.sha256 {
                        if *want != hash {
                            last_err = Some(format!("{url}: checksum {hash} != expected {want}"));
                            continue;
                        }
                    }
                    fs::create_dir_all(target.parent().unwrap_or(root))?;
                    fs::write(&target, &bytes)?;
                    println!("{}: fetched from {url} ({hash})", target.display());
                    done = true;
                    break;
                }
                Err(e) => last_err = Some(format!("{e:#}")),
            }
        }
        if !done {
            return Err(DataError(format!(
                "could not fetch {}/{}: {}",
                entry.dataset,
                entry.name,
                last_err.unwrap_or_else(|| "no mirror URLs configured".into())
            ))
            .into());
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_list_parses() {
        let list = parse_mirrors(BUILTIN_MIRRORS).unwrap();
        assert_eq!(list.file.iter().filter(|e| e.dataset == "mnist").count(), 4);
        assert!(list.file.iter().all(|e| !e.urls.is_empty()));
    }

    #[test]
    fn cached_file_with_matching_hash_is_kept() {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path().join("toy");
        fs::create_dir_all(&d).unwrap();
        fs::write(d.join("a"), b"abc").unwrap();
        let list = MirrorList {
            file: vec![MirrorEntry {
                dataset: "toy".into(),
                name: "a".into(),
                sha256: Some(sha256_hex(b"abc")),
                urls: vec!["http://127.0.0.1:9/unreachable".into()],
            }],
        };
        fetch(&list, Some("toy"), dir.path()).unwrap();
    }

    #[test]
    fn unknown_dataset_is_data_error() {
        let list = parse_mirrors(BUILTIN_MIRRORS).unwrap();
        let err = fetch(&list, Some("nope"), Path::new("/nonexistent")).unwrap_err();
        assert!(err.downcast_ref::<DataError>().is_some());
    }

    #[test]
    fn gzip_detected() {
        use flate2::write::GzEncoder;
        use std::io::Write;
        let mut gz = GzEncoder::new(Vec::new(), flate2::Compression::default());
        gz.write_all(b"hello").unwrap();
        assert_eq!(maybe_gunzip(gz.finish().unwrap()).unwrap(), b"hello");
        assert_eq!(maybe_gunzip(b"plain".to_vec()).unwrap(), b"plain");
    }
}
