//! Labelled point sets in `[−1,1]^d` and their CSV form.
//!
//! CSV layout: a header row, `d` feature columns named `x1..xd`, and a final
//! label column `y`.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{invalid, Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    dim: usize,
    points: Vec<Vec<f64>>,
    labels: Vec<f64>,
    y_max: f64,
}

impl Dataset {
    /// Validates shapes, finiteness and cube membership. Distinctness is
    /// checked by the constructions that need it (see [`separation_radius`]).
    pub fn new(points: Vec<Vec<f64>>, labels: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(invalid("dataset needs at least one point"));
        }
        if points.len() != labels.len() {
            return Err(invalid(format!(
                "{} points but {} labels",
                points.len(),
                labels.len()
            )));
        }
        let dim = points[0].len();
        if dim == 0 {
            return Err(invalid("points must have at least one coordinate"));
        }
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(invalid(format!(
                    "point {i} has dimension {}, expected {dim}",
                    p.len()
                )));
            }
            if p.iter().any(|v| !v.is_finite() || v.abs() > 1.0) {
                return Err(invalid(format!("point {i} lies outside [-1,1]^{dim}")));
            }
        }
        if let Some(i) = labels.iter().position(|y| !y.is_finite()) {
            return Err(invalid(format!("label {i} is not finite")));
        }
        let y_max = labels.iter().fold(0.0f64, |m, y| m.max(y.abs()));
        Ok(Self {
            dim,
            points,
            labels,
            y_max,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn y_max(&self) -> f64 {
        self.y_max
    }

    /// Same points with new labels.
    pub fn with_labels(&self, labels: Vec<f64>) -> Result<Self> {
        Self::new(self.points.clone(), labels)
    }

    pub fn separation_radius(&self) -> Result<f64> {
        separation_radius(&self.points)
    }

    fn subset(&self, idx: &[usize]) -> Result<Self> {
        Self::new(
            idx.iter().map(|&i| self.points[i].clone()).collect(),
            idx.iter().map(|&i| self.labels[i]).collect(),
        )
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for k in 1..=self.dim {
            out.push_str(&format!("x{k},"));
        }
        out.push_str("y\n");
        for (p, y) in self.points.iter().zip(&self.labels) {
            for v in p {
                out.push_str(&format!("{v:.17e},"));
            }
            out.push_str(&format!("{y:.17e}\n"));
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

/// `q_Λ = ½ · min_{i≠j} ‖x_i − x_j‖₂`.
///
/// A single point has no pairs; it gets half its distance to the nearest
/// cube face instead.
pub fn separation_radius(points: &[Vec<f64>]) -> Result<f64> {
    match points {
        [] => Err(invalid("separation radius of an empty point set")),
        [p] => Ok(0.5
            * p.iter()
                .map(|v| 1.0 - v.abs())
                .fold(f64::INFINITY, f64::min)),
        _ => {
            let mut best = f64::INFINITY;
            for i in 0..points.len() {
                for j in i + 1..points.len() {
                    let d2: f64 = points[i]
                        .iter()
                        .zip(&points[j])
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum();
                    if d2 == 0.0 {
                        return Err(invalid(format!("points {i} and {j} coincide")));
                    }
                    best = best.min(d2);
                }
            }
            Ok(0.5 * best.sqrt())
        }
    }
}

/// Result of [`load_csv`].
#[derive(Clone, Debug)]
pub struct CsvSplit {
    pub train: Dataset,
    pub test: Option<Dataset>,
    /// Per-feature `(min, max)` used to map raw columns onto `[−1, 1]`.
    pub normalization: Option<Vec<(f64, f64)>>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SplitOptions {
    pub normalize: bool,
    /// Fraction of rows kept for training; `1.0` keeps everything.
    pub train_ratio: f64,
    pub seed: u64,
}

impl Default for SplitOptions {
    fn default() -> Self {
        Self {
            normalize: false,
            train_ratio: 1.0,
            seed: 0,
        }
    }
}

fn parse_error(text: &str, row: usize, col: usize, message: String) -> Error {
    // byte offset of the start of the offending line
    let offset = text.split_inclusive('\n').take(row).map(str::len).sum();
    Error::Parse {
        offset,
        message: format!("row {row}, column {col}: {message}"),
    }
}

/// Parses CSV text; the last column is the label.
pub fn parse_csv(text: &str, opts: &SplitOptions) -> Result<CsvSplit> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_error(text, 0, 0, "empty file".into()))?;
    let n_cols = header.split(',').count();
    if n_cols < 2 {
        return Err(parse_error(
            text,
            0,
            0,
            "need at least one feature column and a label".into(),
        ));
    }
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (row, line) in lines {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != n_cols {
            return Err(parse_error(
                text,
                row,
                cells.len(),
                format!("expected {n_cols} cells, found {}", cells.len()),
            ));
        }
        let mut vals = Vec::with_capacity(n_cols);
        for (col, cell) in cells.iter().enumerate() {
            let v: f64 = cell
                .trim()
                .parse()
                .map_err(|_| parse_error(text, row, col, format!("non-numeric cell {cell:?}")))?;
            if !v.is_finite() {
                return Err(parse_error(
                    text,
                    row,
                    col,
                    format!("non-finite cell {cell:?}"),
                ));
            }
            vals.push(v);
        }
        rows.push(vals);
    }
    if rows.is_empty() {
        return Err(parse_error(text, 1, 0, "no data rows".into()));
    }
    let d = n_cols - 1;
    let mut warnings = Vec::new();
    let normalization = if opts.normalize {
        let mut ranges = Vec::with_capacity(d);
        for k in 0..d {
            let (lo, hi) = rows
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
                    (lo.min(r[k]), hi.max(r[k]))
                });
            if lo == hi {
                warnings.push(format!("feature column {} is constant; mapped to 0", k + 1));
            }
            ranges.push((lo, hi));
        }
        for r in &mut rows {
            for (k, &(lo, hi)) in ranges.iter().enumerate() {
                r[k] = if lo == hi {
                    0.0
                } else if r[k] == hi {
                    1.0
                } else {
                    -1.0 + 2.0 * (r[k] - lo) / (hi - lo)
                };
            }
        }
        Some(ranges)
    } else {
        None
    };
    let all = Dataset::new(
        rows.iter().map(|r| r[..d].to_vec()).collect(),
        rows.iter().map(|r| r[d]).collect(),
    )?;
    let (train, test) = split(&all, opts.train_ratio, opts.seed)?;
    Ok(CsvSplit {
        train,
        test,
        normalization,
        warnings,
    })
}

pub fn load_csv(path: &Path, opts: &SplitOptions) -> Result<CsvSplit> {
    let text = std::fs::read_to_string(path)?;
    parse_csv(&text, opts)
}

/// Seeded shuffle, then the first `round(ratio · m)` rows train.
pub fn split(ds: &Dataset, train_ratio: f64, seed: u64) -> Result<(Dataset, Option<Dataset>)> {
    if !(train_ratio > 0.0 && train_ratio <= 1.0) {
        return Err(invalid(format!(
            "train ratio must lie in (0, 1], got {train_ratio}"
        )));
    }
    if train_ratio == 1.0 {
        return Ok((ds.clone(), None));
    }
    let mut idx: Vec<usize> = (0..ds.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = ((train_ratio * ds.len() as f64).round() as usize).clamp(1, ds.len());
    let train = ds.subset(&idx[..n_train])?;
    let test = if n_train < ds.len() {
        Some(ds.subset(&idx[n_train..])?)
    } else {
        None
    };
    Ok((train, test))
}
