use crate::error::{invalid, Result};

/// Affine map `x ↦ W x + b` with `W` stored row-compressed.
///
/// Only nonzero weights are stored; a zero entry of the dense matrix is the
/// same thing as an absent entry. Every stored value is finite.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineMap {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<f64>,
    bias: Vec<f64>,
}

impl AffineMap {
    /// Builds a map from a dense row-major `rows × cols` weight buffer.
    pub fn from_dense(rows: usize, cols: usize, weights: &[f64], bias: Vec<f64>) -> Result<Self> {
        if weights.len() != rows * cols {
            return Err(invalid(format!(
                "weight buffer has {} entries, expected {rows}x{cols}",
                weights.len()
            )));
        }
        let sparse = (0..rows)
            .map(|r| {
                weights[r * cols..(r + 1) * cols]
                    .iter()
                    .copied()
                    .enumerate()
                    .collect::<Vec<_>>()
            })
            .collect();
        Self::from_rows(cols, sparse, bias)
    }

    /// Builds a map from per-row `(column, weight)` lists. Zero weights are
    /// dropped and duplicate columns within a row are summed.
    pub fn from_rows(cols: usize, rows: Vec<Vec<(usize, f64)>>, bias: Vec<f64>) -> Result<Self> {
        let n_rows = rows.len();
        if n_rows == 0 || cols == 0 {
            return Err(invalid(format!(
                "affine map must have positive shape, got {n_rows}x{cols}"
            )));
        }
        if bias.len() != n_rows {
            return Err(invalid(format!(
                "bias has length {}, expected {n_rows}",
                bias.len()
            )));
        }
        if let Some(b) = bias.iter().find(|b| !b.is_finite()) {
            return Err(invalid(format!("non-finite bias {b}")));
        }
        let mut row_ptr = Vec::with_capacity(n_rows + 1);
        let mut col_idx = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            let start = col_idx.len();
            for (c, w) in row {
                if c >= cols {
                    return Err(invalid(format!(
                        "column {c} out of range for {cols} inputs"
                    )));
                }
                if !w.is_finite() {
                    return Err(invalid(format!("non-finite weight {w}")));
                }
                if col_idx.len() > start && col_idx[col_idx.len() - 1] == c {
                    *vals.last_mut().unwrap() += w;
                } else {
                    col_idx.push(c);
                    vals.push(w);
                }
            }
            // drop entries that are (or summed to) zero
            let mut keep = start;
            for k in start..col_idx.len() {
                if vals[k] != 0.0 {
                    col_idx[keep] = col_idx[k];
                    vals[keep] = vals[k];
                    keep += 1;
                }
            }
            col_idx.truncate(keep);
            vals.truncate(keep);
            row_ptr.push(col_idx.len());
        }
        Ok(Self {
            rows: n_rows,
            cols,
            row_ptr,
            col_idx,
            vals,
            bias,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Number of stored (nonzero) weights.
    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    /// Nonzero entries of row `r` as `(column, weight)` pairs in column order.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.vals[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.row(r).find(|&(j, _)| j == c).map_or(0.0, |(_, w)| w)
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.rows * self.cols];
        for r in 0..self.rows {
            for (c, w) in self.row(r) {
                out[r * self.cols + c] = w;
            }
        }
        out
    }

    pub(crate) fn row_lists(&self) -> Vec<Vec<(usize, f64)>> {
        (0..self.rows).map(|r| self.row(r).collect()).collect()
    }

    /// `out = σ(W x + b)`. The weighted sum is accumulated in column order and
    /// the bias is added last.
    #[inline]
    pub(crate) fn apply_relu(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend((0..self.rows).map(|r| {
            let span = self.row_ptr[r]..self.row_ptr[r + 1];
            let mut acc = 0.0;
            for (&c, &w) in self.col_idx[span.clone()].iter().zip(&self.vals[span]) {
                acc += w * x[c];
            }
            (acc + self.bias[r]).max(0.0)
        }));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_round_trip_drops_zeros() {
        let w = [1.0, 0.0, -2.0, 0.0, 0.0, 3.5];
        let m = AffineMap::from_dense(2, 3, &w, vec![0.5, -0.5]).unwrap();
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.to_dense(), w.to_vec());
        assert_eq!(m.get(1, 2), 3.5);
        assert_eq!(m.get(1, 0), 0.0);
    }

    #[test]
    fn rejects_bad_shapes_and_values() {
        assert!(AffineMap::from_dense(2, 2, &[1.0; 3], vec![0.0; 2]).is_err());
        assert!(AffineMap::from_dense(1, 1, &[f64::NAN], vec![0.0]).is_err());
        assert!(AffineMap::from_dense(1, 1, &[1.0], vec![f64::INFINITY]).is_err());
        assert!(AffineMap::from_rows(0, vec![vec![]], vec![0.0]).is_err());
        assert!(AffineMap::from_rows(2, vec![vec![(2, 1.0)]], vec![0.0]).is_err());
    }

    #[test]
    fn duplicate_columns_are_summed() {
        let m =
            AffineMap::from_rows(2, vec![vec![(1, 1.0), (0, 2.0), (1, -1.0)]], vec![0.0]).unwrap();
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.get(0, 0), 2.0);
    }

    #[test]
    fn relu_application() {
        let m = AffineMap::from_dense(2, 1, &[1.0, -1.0], vec![0.0, 0.0]).unwrap();
        let mut out = Vec::new();
        m.apply_relu(&[-3.0], &mut out);
        assert_eq!(out, vec![0.0, 3.0]);
    }
}
