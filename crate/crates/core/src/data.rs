//! Image datasets in IDX format, one-hot targets and the intraclass-variance statistic.

use std::fmt;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use flate2::read::GzDecoder;
use ndarray::{s, Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::readout::TargetMatrix;

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// Flattened grayscale images with class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// `n_samples x n_pixels`, row-major flattened images.
    pub images: Array2<u8>,
    pub labels: Vec<usize>,
    pub n_classes: usize,
    pub name: String,
}

impl Dataset {
    pub fn new(images: Array2<u8>, labels: Vec<usize>, n_classes: usize, name: impl Into<String>) -> Result<Self> {
        if images.nrows() != labels.len() {
            return Err(Error::CountMismatch {
                images: images.nrows(),
                labels: labels.len(),
            });
        }
        if let Some(&label) = labels.iter().find(|&&l| l >= n_classes) {
            return Err(Error::LabelOutOfRange { label, n_classes });
        }
        Ok(Self {
            images,
            labels,
            n_classes,
            name: name.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_pixels(&self) -> usize {
        self.images.ncols()
    }

    /// Rows `start..end` as a new dataset.
    pub fn slice(&self, start: usize, end: usize) -> Dataset {
        let end = end.min(self.len());
        let start = start.min(end);
        Dataset {
            images: self.images.slice(s![start..end, ..]).to_owned(),
            labels: self.labels[start..end].to_vec(),
            n_classes: self.n_classes,
            name: self.name.clone(),
        }
    }

    pub fn head(&self, n: usize) -> Dataset {
        self.slice(0, n)
    }

    /// Splits off the last `n` samples: `(first, last_n)`.
    pub fn split_tail(&self, n: usize) -> (Dataset, Dataset) {
        let cut = self.len().saturating_sub(n);
        (self.slice(0, cut), self.slice(cut, self.len()))
    }

    pub fn targets(&self) -> Result<TargetMatrix> {
        one_hot(&self.labels, self.n_classes)
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }
}

/// One-hot `n_classes x n_samples` target matrix.
pub fn one_hot(labels: &[usize], n_classes: usize) -> Result<TargetMatrix> {
    TargetMatrix::from_labels(labels, n_classes)
}

fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path).map_err(|e| Error::from(e).context(format!("reading {}", path.display())))?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::from(e).context(format!("decompressing {}", path.display())))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn read_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    let chunk = bytes.get(offset..offset + 4).ok_or(Error::TruncatedFile {
        needed: offset + 4,
        available: bytes.len(),
    })?;
    Ok(u32::from_be_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]))
}

/// Parses a 3-D unsigned-byte IDX tensor into `n x (rows*cols)`.
pub fn parse_idx_images(bytes: &[u8]) -> Result<(Array2<u8>, usize, usize)> {
    let magic = read_u32(bytes, 0)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::BadMagic {
            expected: IDX_IMAGES_MAGIC,
            found: magic,
        });
    }
    let n = read_u32(bytes, 4)? as usize;
    let rows = read_u32(bytes, 8)? as usize;
    let cols = read_u32(bytes, 12)? as usize;
    let pixels = rows * cols;
    let needed = 16 + n * pixels;
    if bytes.len() < needed {
        return Err(Error::TruncatedFile {
            needed,
            available: bytes.len(),
        });
    }
    let images = Array2::from_shape_vec((n, pixels), bytes[16..needed].to_vec())
        .map_err(|e| Error::DegenerateData(e.to_string()))?;
    Ok((images, rows, cols))
}

/// Parses a 1-D unsigned-byte IDX label vector.
pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = read_u32(bytes, 0)?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::BadMagic {
            expected: IDX_LABELS_MAGIC,
            found: magic,
        });
    }
    let n = read_u32(bytes, 4)? as usize;
    let needed = 8 + n;
    if bytes.len() < needed {
        return Err(Error::TruncatedFile {
            needed,
            available: bytes.len(),
        });
    }
    Ok(bytes[8..needed].to_vec())
}

pub fn encode_idx_images(images: &Array2<u8>, rows: usize, cols: usize) -> Vec<u8> {
    assert_eq!(images.ncols(), rows * cols, "image size does not match rows*cols");
    let mut out = Vec::with_capacity(16 + images.len());
    out.extend_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
    out.extend_from_slice(&(images.nrows() as u32).to_be_bytes());
    out.extend_from_slice(&(rows as u32).to_be_bytes());
    out.extend_from_slice(&(cols as u32).to_be_bytes());
    out.extend(images.iter().copied());
    out
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

/// Loads an image/label IDX pair (plain or gzip). The class count is
/// inferred as `max(label) + 1`.
pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<Dataset> {
    let name = images_path
        .as_ref()
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    load_idx_with(images_path, labels_path, &name, None, 0)
}

/// Loads an IDX pair, subtracting `label_offset` from every raw label.
pub fn load_idx_with(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
    name: &str,
    n_classes: Option<usize>,
    label_offset: usize,
) -> Result<Dataset> {
    let (images, _, _) = parse_idx_images(&read_maybe_gz(images_path.as_ref())?)?;
    let raw = parse_idx_labels(&read_maybe_gz(labels_path.as_ref())?)?;
    if images.nrows() != raw.len() {
        return Err(Error::CountMismatch {
            images: images.nrows(),
            labels: raw.len(),
        });
    }
    let mut labels = Vec::with_capacity(raw.len());
    for &l in &raw {
        let l = l as usize;
        if l < label_offset {
            return Err(Error::LabelOutOfRange {
                label: l,
                n_classes: n_classes.unwrap_or(0),
            });
        }
        labels.push(l - label_offset);
    }
    let n_classes = n_classes.unwrap_or_else(|| labels.iter().max().map_or(0, |m| m + 1));
    Dataset::new(images, labels, n_classes, name)
}

/// The three benchmark datasets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetKind {
    Mnist,
    EmnistLetters,
    FashionMnist,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl DatasetKind {
    pub const ALL: [DatasetKind; 3] = [
        DatasetKind::Mnist,
        DatasetKind::EmnistLetters,
        DatasetKind::FashionMnist,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DatasetKind::Mnist => "mnist",
            DatasetKind::EmnistLetters => "emnist-letters",
            DatasetKind::FashionMnist => "fashion-mnist",
        }
    }

    pub fn n_classes(self) -> usize {
        match self {
            DatasetKind::EmnistLetters => 26,
            _ => 10,
        }
    }

    /// EMNIST letters are distributed 1-indexed.
    pub fn label_offset(self) -> usize {
        match self {
            DatasetKind::EmnistLetters => 1,
            _ => 0,
        }
    }

    /// Base file names `(images, labels)` without a `.gz` suffix.
    pub fn file_names(self, split: Split) -> (String, String) {
        let (prefix, tag) = match (self, split) {
            (DatasetKind::EmnistLetters, Split::Train) => ("emnist-letters-", "train"),
            (DatasetKind::EmnistLetters, Split::Test) => ("emnist-letters-", "test"),
            (_, Split::Train) => ("", "train"),
            (_, Split::Test) => ("", "t10k"),
        };
        (
            format!("{prefix}{tag}-images-idx3-ubyte"),
            format!("{prefix}{tag}-labels-idx1-ubyte"),
        )
    }

    /// Directory holding this dataset under a data root.
    pub fn dir(self, root: &Path) -> PathBuf {
        root.join(self.name())
    }

    /// Resolved paths of an image/label pair, preferring uncompressed files.
    pub fn paths(self, root: &Path, split: Split) -> Result<(PathBuf, PathBuf)> {
        let dir = self.dir(root);
        let (img, lbl) = self.file_names(split);
        let find = |base: &str| -> Result<PathBuf> {
            let plain = dir.join(base);
            if plain.is_file() {
                return Ok(plain);
            }
            let gz = dir.join(format!("{base}.gz"));
            if gz.is_file() {
                return Ok(gz);
            }
            Err(Error::Io(std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("{} not found (also tried .gz)", plain.display()),
            )))
        };
        Ok((find(&img)?, find(&lbl)?))
    }

    pub fn is_available(self, root: &Path) -> bool {
        self.paths(root, Split::Train).is_ok() && self.paths(root, Split::Test).is_ok()
    }

    pub fn load(self, root: &Path, split: Split) -> Result<Dataset> {
        let (img, lbl) = self.paths(root, split)?;
        let tag = match split {
            Split::Train => "train",
            Split::Test => "test",
        };
        load_idx_with(
            img,
            lbl,
            &format!("{}-{tag}", self.name()),
            Some(self.n_classes()),
            self.label_offset(),
        )
    }
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DatasetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "mnist" => Ok(DatasetKind::Mnist),
            "emnist-letters" | "emnist" => Ok(DatasetKind::EmnistLetters),
            "fashion-mnist" | "fmnist" => Ok(DatasetKind::FashionMnist),
            other => Err(Error::InvalidConfig(format!("unknown dataset '{other}'"))),
        }
    }
}

/// How the squared deviation `(x_i - K)^2` of an image is reduced over pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceConvention {
    /// Mean over pixels.
    PixelMean,
    /// Sum over pixels.
    PixelSum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntraclassVariance {
    pub per_class: Vec<f64>,
    pub average: f64,
    pub convention: VarianceConvention,
}

/// Per-class mean squared deviation from the class-mean image, and the
/// unweighted average over classes.
pub fn intraclass_variance(dataset: &Dataset, convention: VarianceConvention) -> Result<IntraclassVariance> {
    let n_pixels = dataset.n_pixels();
    let counts = dataset.class_counts();
    if let Some(k) = counts.iter().position(|&c| c == 0) {
        return Err(Error::EmptyClass(k));
    }
    let mut means = Array2::<f64>::zeros((dataset.n_classes, n_pixels));
    for (row, &label) in dataset.images.rows().into_iter().zip(&dataset.labels) {
        let mut m = means.row_mut(label);
        for (acc, &v) in m.iter_mut().zip(row.iter()) {
            *acc += f64::from(v);
        }
    }
    for (mut m, &c) in means.rows_mut().into_iter().zip(&counts) {
        m /= c as f64;
    }
    let mut sq = Array1::<f64>::zeros(dataset.n_classes);
    for (row, &label) in dataset.images.rows().into_iter().zip(&dataset.labels) {
        let m = means.row(label);
        let d: f64 = row
            .iter()
            .zip(m.iter())
            .map(|(&v, &mu)| {
                let e = f64::from(v) - mu;
                e * e
            })
            .sum();
        sq[label] += d;
    }
    let scale = match convention {
        VarianceConvention::PixelMean => n_pixels as f64,
        VarianceConvention::PixelSum => 1.0,
    };
    let per_class: Vec<f64> = sq.iter().zip(&counts).map(|(&s, &c)| s / c as f64 / scale).collect();
    let average = per_class.iter().sum::<f64>() / per_class.len() as f64;
    Ok(IntraclassVariance {
        per_class,
        average,
        convention,
    })
}

/// Computes both conventions and returns the one whose average lies within
/// `rel_tol` of `reference`, if any (closest first).
pub fn select_convention(dataset: &Dataset, reference: f64, rel_tol: f64) -> Result<Option<IntraclassVariance>> {
    let mut best: Option<(f64, IntraclassVariance)> = None;
    for convention in [VarianceConvention::PixelMean, VarianceConvention::PixelSum] {
        let v = intraclass_variance(dataset, convention)?;
        let err = ((v.average - reference) / reference).abs();
        if err <= rel_tol && best.as_ref().map_or(true, |(e, _)| err < *e) {
            best = Some((err, v));
        }
    }
    Ok(best.map(|(_, v)| v))
}
