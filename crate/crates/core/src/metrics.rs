//! Representation similarity and downstream task metrics.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::bio::{self, BioViolation};
use crate::model::Matrix;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("row count mismatch: {0} vs {1}")]
    RowMismatch(usize, usize),
    #[error("length mismatch: {0} predictions, {1} references")]
    LengthMismatch(usize, usize),
    #[error("need at least 2 rows, got {0}")]
    TooFewRows(usize),
    #[error("matrix is constant after centering")]
    ZeroVariance,
    #[error("non-finite value at row {row}")]
    NonFinite { row: usize },
    #[error("sample {sample}: {side} tags have length {found}, expected {expected}")]
    TagLength {
        sample: usize,
        side: &'static str,
        found: usize,
        expected: usize,
    },
    #[error("sample {sample}: malformed {side} BIO ({violation:?})")]
    MalformedBio {
        sample: usize,
        side: &'static str,
        violation: BioViolation,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// `n x p` embeddings with one identifier per row.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    ids: Vec<String>,
    values: Matrix,
}

impl EmbeddingMatrix {
    pub fn new(ids: Vec<String>, values: Matrix) -> Result<Self, MetricError> {
        if ids.len() != values.rows() {
            return Err(MetricError::RowMismatch(ids.len(), values.rows()));
        }
        if let Some(row) = (0..values.rows()).find(|&r| values.row(r).iter().any(|v| !v.is_finite())) {
            return Err(MetricError::NonFinite { row });
        }
        Ok(EmbeddingMatrix { ids, values })
    }

    /// Rows numbered `0..n`.
    pub fn from_matrix(values: Matrix) -> Result<Self, MetricError> {
        let ids = (0..values.rows()).map(|i| i.to_string()).collect();
        Self::new(ids, values)
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn rows(&self) -> usize {
        self.values.rows()
    }

    /// Parses `id<TAB>v1<TAB>...` lines. Blank lines are skipped.
    pub fn parse_tsv(s: &str) -> Result<Self, MetricError> {
        let mut ids = Vec::new();
        let mut data = Vec::new();
        let mut width = None;
        for (i, line) in s.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split('\t');
            let id = fields.next().unwrap_or_default();
            let row = fields
                .map(|f| f.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| MetricError::Parse {
                    line: i + 1,
                    message: e.to_string(),
                })?;
            match width {
                None if row.is_empty() => {
                    return Err(MetricError::Parse {
                        line: i + 1,
                        message: "no values".into(),
                    })
                }
                None => width = Some(row.len()),
                Some(w) if w != row.len() => {
                    return Err(MetricError::Parse {
                        line: i + 1,
                        message: format!("{} values, expected {w}", row.len()),
                    })
                }
                _ => {}
            }
            ids.push(id.to_string());
            data.extend(row);
        }
        let cols = width.unwrap_or(0);
        Self::new(ids.clone(), Matrix::from_vec(ids.len(), cols, data))
    }

    pub fn read_tsv(path: &Path) -> Result<Self, MetricError> {
        let s = std::fs::read_to_string(path).map_err(|source| MetricError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse_tsv(&s)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (i, id) in self.ids.iter().enumerate() {
            out.push_str(id);
            for v in self.values.row(i) {
                let _ = write!(out, "\t{v:?}");
            }
            out.push('\n');
        }
        out
    }
}

/// Linear CKA: `‖Ycᵀ Xc‖²_F / (‖Xcᵀ Xc‖_F ‖Ycᵀ Yc‖_F)` with column-centered inputs.
pub fn cka(x: &EmbeddingMatrix, y: &EmbeddingMatrix) -> Result<f64, MetricError> {
    cka_matrices(&x.values, &y.values)
}

pub fn cka_matrices(x: &Matrix, y: &Matrix) -> Result<f64, MetricError> {
    if x.rows() != y.rows() {
        return Err(MetricError::RowMismatch(x.rows(), y.rows()));
    }
    if x.rows() < 2 {
        return Err(MetricError::TooFewRows(x.rows()));
    }
    let xc = x.center_columns();
    let yc = y.center_columns();
    let xx = xc.t_matmul(&xc).frobenius_norm();
    let yy = yc.t_matmul(&yc).frobenius_norm();
    if xx == 0.0 || yy == 0.0 {
        return Err(MetricError::ZeroVariance);
    }
    let yx = yc.t_matmul(&xc).frobenius_norm();
    Ok((yx * yx / (xx * yy)).clamp(0.0, 1.0))
}

pub fn accuracy(pred: &[usize], gold: &[usize]) -> Result<f64, MetricError> {
    if pred.len() != gold.len() {
        return Err(MetricError::LengthMismatch(pred.len(), gold.len()));
    }
    if gold.is_empty() {
        return Ok(0.0);
    }
    let hits = pred.iter().zip(gold).filter(|(p, g)| p == g).count();
    Ok(hits as f64 / gold.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpanScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Entity-level precision, recall and F1 with exact boundary and type match.
pub fn span_f1<S: AsRef<str>>(pred: &[Vec<S>], gold: &[Vec<S>]) -> Result<SpanScores, MetricError> {
    if pred.len() != gold.len() {
        return Err(MetricError::LengthMismatch(pred.len(), gold.len()));
    }
    let (mut tp, mut np, mut ng) = (0usize, 0usize, 0usize);
    for (sample, (p, g)) in pred.iter().zip(gold).enumerate() {
        if p.len() != g.len() {
            return Err(MetricError::TagLength {
                sample,
                side: "predicted",
                found: p.len(),
                expected: g.len(),
            });
        }
        let spans = |tags: &[S], side: &'static str| {
            let tags: Vec<&str> = tags.iter().map(AsRef::as_ref).collect();
            let ents =
                bio::entities(&tags).map_err(|violation| MetricError::MalformedBio { sample, side, violation })?;
            let mut counts: HashMap<(usize, usize, String), usize> = HashMap::new();
            for e in ents {
                *counts.entry(e).or_default() += 1;
            }
            Ok::<_, MetricError>(counts)
        };
        let ps = spans(p, "predicted")?;
        let gs = spans(g, "gold")?;
        np += ps.values().sum::<usize>();
        ng += gs.values().sum::<usize>();
        tp += ps.iter().map(|(k, c)| (*c).min(gs.get(k).copied().unwrap_or(0))).sum::<usize>();
    }
    let precision = if np == 0 { 0.0 } else { tp as f64 / np as f64 };
    let recall = if ng == 0 { 0.0 } else { tp as f64 / ng as f64 };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(SpanScores { precision, recall, f1 })
}

/// Maps plain part-of-speech tags `X` to single-word entities `B-X`, so
/// [`span_f1`] scores them per word.
pub fn pos_tags_as_bio<S: AsRef<str>>(tags: &[S]) -> Vec<String> {
    tags.iter().map(|t| format!("B-{}", t.as_ref())).collect()
}

/// Trim, collapse internal whitespace, lowercase ASCII letters.
pub fn normalize_answer(s: &str) -> String {
    s.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .chars()
        .map(|c| c.to_ascii_lowercase())
        .collect()
}

pub fn exact_match<S: AsRef<str>>(pred: &[S], gold: &[S]) -> Result<f64, MetricError> {
    if pred.len() != gold.len() {
        return Err(MetricError::LengthMismatch(pred.len(), gold.len()));
    }
    if gold.is_empty() {
        return Ok(0.0);
    }
    let hits = pred
        .iter()
        .zip(gold)
        .filter(|(p, g)| normalize_answer(p.as_ref()) == normalize_answer(g.as_ref()))
        .count();
    Ok(hits as f64 / gold.len() as f64)
}
