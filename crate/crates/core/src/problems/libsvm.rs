//! LIBSVM sparse text format: one sample per line, `label idx:val idx:val ...`
//! with 1-based strictly increasing indices.

use std::fs;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LibsvmError {
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("line {line}: feature indices must be strictly increasing (index {idx} after {prev})")]
    NonIncreasingIndex { line: usize, idx: usize, prev: usize },
    #[error("line {line}: label {label} is not in {{-1, 0, +1}}")]
    BadLabel { line: usize, label: f64 },
    #[error("dataset is empty")]
    Empty,
}

/// One parsed sample: a +/-1 label and its sparse features (0-based indices).
#[derive(Debug, Clone, PartialEq)]
pub struct LibsvmRow {
    pub label: f64,
    pub features: Vec<(usize, f64)>,
}

/// A parsed LIBSVM dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct LibsvmDataset {
    pub rows: Vec<LibsvmRow>,
    /// Max feature index seen, or a larger declared width.
    pub n_features: usize,
}

impl LibsvmDataset {
    pub fn n_samples(&self) -> usize {
        self.rows.len()
    }

    /// Widens the feature space to a declared width (collections often list
    /// more features than a particular split happens to use). Widths below
    /// the observed maximum are ignored.
    pub fn with_declared_features(mut self, n: usize) -> Self {
        self.n_features = self.n_features.max(n);
        self
    }

    /// Serializes back to LIBSVM text with 17 significant digits, enough for
    /// a lossless round trip of every `f64`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for row in &self.rows {
            out.push_str(if row.label > 0.0 { "+1" } else { "-1" });
            for &(idx, val) in &row.features {
                out.push_str(&format!(" {}:{:.16e}", idx + 1, val));
            }
            out.push('\n');
        }
        out
    }
}

/// Parses LIBSVM text. Labels are normalized to {-1, +1}, accepting 0/1 files
/// by mapping 0 to -1. Indices are 1-based in the file and stored 0-based.
pub fn parse_libsvm(text: &str) -> Result<LibsvmDataset, LibsvmError> {
    let mut rows = Vec::new();
    let mut n_features = 0usize;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        let mut parts = trimmed.split_ascii_whitespace();
        let label_tok = parts.next().expect("non-empty line has a first token");
        let label_val: f64 = label_tok.parse().map_err(|_| LibsvmError::Malformed {
            line,
            msg: format!("unparseable label {label_tok:?}"),
        })?;
        let label = if label_val == 0.0 {
            -1.0
        } else if label_val == 1.0 || label_val == -1.0 {
            label_val
        } else {
            return Err(LibsvmError::BadLabel {
                line,
                label: label_val,
            });
        };
        let mut features = Vec::new();
        let mut prev_idx = 0usize; // file indices are 1-based, so 0 = none yet
        for tok in parts {
            let (idx_s, val_s) = tok.split_once(':').ok_or_else(|| LibsvmError::Malformed {
                line,
                msg: format!("expected idx:val, got {tok:?}"),
            })?;
            let idx: usize = idx_s.parse().map_err(|_| LibsvmError::Malformed {
                line,
                msg: format!("unparseable index {idx_s:?}"),
            })?;
            if idx == 0 {
                return Err(LibsvmError::Malformed {
                    line,
                    msg: "indices are 1-based; got 0".into(),
                });
            }
            let val: f64 = val_s.parse().map_err(|_| LibsvmError::Malformed {
                line,
                msg: format!("unparseable value {val_s:?}"),
            })?;
            if !val.is_finite() {
                return Err(LibsvmError::Malformed {
                    line,
                    msg: format!("non-finite value {val}"),
                });
            }
            if idx <= prev_idx {
                return Err(LibsvmError::NonIncreasingIndex {
                    line,
                    idx,
                    prev: prev_idx,
                });
            }
            prev_idx = idx;
            features.push((idx - 1, val));
            n_features = n_features.max(idx);
        }
        rows.push(LibsvmRow { label, features });
    }
    if rows.is_empty() {
        return Err(LibsvmError::Empty);
    }
    Ok(LibsvmDataset { rows, n_features })
}

pub fn parse_libsvm_file(path: &Path) -> Result<LibsvmDataset, std::io::Error> {
    let text = fs::read_to_string(path)?;
    parse_libsvm(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
}
