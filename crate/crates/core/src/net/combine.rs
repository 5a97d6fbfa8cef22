use super::{AffineMap, ReadoutRow, ReluNet, StackedNet};
use crate::error::{invalid, Result};

/// How the first layers of combined nets see the input.
#[derive(Clone, Copy, PartialEq)]
enum InputMode {
    Shared,
    Disjoint,
}

fn block_diagonal(nets: &[StackedNet], mode: InputMode) -> Result<StackedNet> {
    let first = nets.first().ok_or_else(|| invalid("no nets to combine"))?;
    let depth = first.depth();
    if let Some(n) = nets.iter().find(|n| n.depth() != depth) {
        return Err(invalid(format!(
            "depth mismatch ({} vs {}); equalize with pad_depth first",
            n.depth(),
            depth
        )));
    }
    let input_dim = match mode {
        InputMode::Shared => {
            if let Some(n) = nets.iter().find(|n| n.input_dim() != first.input_dim()) {
                return Err(invalid(format!(
                    "input dimension mismatch ({} vs {})",
                    n.input_dim(),
                    first.input_dim()
                )));
            }
            first.input_dim()
        }
        InputMode::Disjoint => nets.iter().map(StackedNet::input_dim).sum(),
    };

    let mut layers = Vec::with_capacity(depth);
    // column offsets of each block in the layer input
    let mut col_off: Vec<usize> = match mode {
        InputMode::Shared => vec![0; nets.len()],
        InputMode::Disjoint => offsets(nets.iter().map(StackedNet::input_dim)),
    };
    let mut cols = input_dim;
    for l in 0..depth {
        let mut rows = Vec::new();
        let mut bias = Vec::new();
        let mut row_off = Vec::with_capacity(nets.len());
        for (net, &off) in nets.iter().zip(&col_off) {
            row_off.push(rows.len());
            let layer = &net.layers()[l];
            for r in 0..layer.rows() {
                rows.push(layer.row(r).map(|(c, w)| (c + off, w)).collect());
            }
            bias.extend_from_slice(layer.bias());
        }
        let n_rows = rows.len();
        layers.push(AffineMap::from_rows(cols, rows, bias)?);
        col_off = row_off;
        cols = n_rows;
    }
    let mut readout = Vec::new();
    for (net, &off) in nets.iter().zip(&col_off) {
        for row in net.readout_rows() {
            readout.push(row.iter().map(|&(j, w)| (j + off, w)).collect());
        }
    }
    StackedNet::new(input_dim, layers, readout)
}

fn offsets(sizes: impl Iterator<Item = usize>) -> Vec<usize> {
    let mut acc = 0;
    sizes
        .map(|s| {
            let o = acc;
            acc += s;
            o
        })
        .collect()
}

impl StackedNet {
    /// Runs `nets` side by side on the same input; outputs are concatenated.
    pub fn stack(nets: &[StackedNet]) -> Result<StackedNet> {
        block_diagonal(nets, InputMode::Shared)
    }

    /// Runs `nets` on consecutive slices of a concatenated input.
    pub fn side_by_side(nets: &[StackedNet]) -> Result<StackedNet> {
        block_diagonal(nets, InputMode::Disjoint)
    }

    /// Feeds this net's outputs into `outer`. The readout of `self` is folded
    /// into the first layer of `outer`, so depth adds exactly.
    pub fn then(&self, outer: &StackedNet) -> Result<StackedNet> {
        if outer.input_dim() != self.outputs() {
            return Err(invalid(format!(
                "outer net expects {} inputs, inner net has {} outputs",
                outer.input_dim(),
                self.outputs()
            )));
        }
        let inner_width = self.layers().last().unwrap().rows();
        let first = &outer.layers()[0];
        let mut scratch = vec![0.0; inner_width];
        let mut mark = vec![false; inner_width];
        let mut touched = Vec::new();
        let mut rows = Vec::with_capacity(first.rows());
        for r in 0..first.rows() {
            for (k, w) in first.row(r) {
                for &(j, a) in &self.readout_rows()[k] {
                    if !mark[j] {
                        mark[j] = true;
                        touched.push(j);
                    }
                    scratch[j] += w * a;
                }
            }
            touched.sort_unstable();
            rows.push(
                touched
                    .iter()
                    .map(|&j| {
                        mark[j] = false;
                        (j, std::mem::take(&mut scratch[j]))
                    })
                    .collect(),
            );
            touched.clear();
        }
        let merged = AffineMap::from_rows(inner_width, rows, first.bias().to_vec())?;
        let mut layers = self.layers().to_vec();
        layers.push(merged);
        layers.extend_from_slice(&outer.layers()[1..]);
        StackedNet::new(self.input_dim(), layers, outer.readout_rows().to_vec())
    }

    /// Replaces the outputs with linear combinations `matrix · outputs`.
    pub fn map_outputs(&self, matrix: &[Vec<f64>]) -> Result<StackedNet> {
        let k = self.outputs();
        let mut readout: Vec<ReadoutRow> = Vec::with_capacity(matrix.len());
        for coeffs in matrix {
            if coeffs.len() != k {
                return Err(invalid(format!(
                    "output map row has {} entries, net has {k} outputs",
                    coeffs.len()
                )));
            }
            let mut row = std::collections::BTreeMap::new();
            for (c, src) in coeffs.iter().zip(self.readout_rows()) {
                if *c == 0.0 {
                    continue;
                }
                for &(j, a) in src {
                    *row.entry(j).or_insert(0.0) += c * a;
                }
            }
            readout.push(row.into_iter().collect::<ReadoutRow>());
        }
        let (input_dim, layers, _) = self.clone().into_parts();
        StackedNet::new(input_dim, layers, readout)
    }

    /// Appends identity layers `t ↦ σ(t) − σ(−t)` on every output channel.
    ///
    /// For each channel the first added layer holds `[r; −r]` for that
    /// channel's readout row `r`; every further layer holds the 2×2 block
    /// `[[1, −1], [−1, 1]]`; the new readout is `(1, −1)` per channel.
    pub fn pad_depth(&self, target_depth: usize) -> Result<StackedNet> {
        if target_depth < self.depth() {
            return Err(invalid(format!(
                "target depth {target_depth} is below current depth {}",
                self.depth()
            )));
        }
        let extra = target_depth - self.depth();
        if extra == 0 {
            return Ok(self.clone());
        }
        let k = self.outputs();
        let (input_dim, mut layers, readout) = self.clone().into_parts();
        let width = layers.last().unwrap().rows();
        let mut rows = Vec::with_capacity(2 * k);
        for row in &readout {
            rows.push(row.clone());
            rows.push(row.iter().map(|&(j, a)| (j, -a)).collect());
        }
        layers.push(AffineMap::from_rows(width, rows, vec![0.0; 2 * k])?);
        for _ in 1..extra {
            let rows = (0..k)
                .flat_map(|c| {
                    [
                        vec![(2 * c, 1.0), (2 * c + 1, -1.0)],
                        vec![(2 * c, -1.0), (2 * c + 1, 1.0)],
                    ]
                })
                .collect();
            layers.push(AffineMap::from_rows(2 * k, rows, vec![0.0; 2 * k])?);
        }
        let readout = (0..k)
            .map(|c| vec![(2 * c, 1.0), (2 * c + 1, -1.0)])
            .collect();
        StackedNet::new(input_dim, layers, readout)
    }
}

/// Net evaluating `Σ coeffs[i] · nets[i](x)`; hidden layers are stacked
/// block-diagonally and the readouts concatenated after scaling.
///
/// The parameter count is exactly the sum of the parts.
pub fn sum_nets(nets: &[ReluNet], coeffs: &[f64]) -> Result<ReluNet> {
    if nets.len() != coeffs.len() {
        return Err(invalid(format!(
            "{} nets but {} coefficients",
            nets.len(),
            coeffs.len()
        )));
    }
    let stacked = stack_parallel(nets)?;
    let width = stacked.layers().last().unwrap().rows();
    let mut readout = vec![0.0; width];
    for (row, &c) in stacked.readout_rows().iter().zip(coeffs) {
        for &(j, a) in row {
            readout[j] = c * a;
        }
    }
    let (input_dim, layers, _) = stacked.into_parts();
    ReluNet::new(input_dim, layers, readout)
}

/// Output `i` of the returned net is `nets[i](x)`.
pub fn stack_parallel(nets: &[ReluNet]) -> Result<StackedNet> {
    let parts: Vec<StackedNet> = nets.iter().cloned().map(StackedNet::from).collect();
    StackedNet::stack(&parts)
}

/// `x ↦ outer(inner(x))` for a one-input `outer`.
pub fn compose_serial(outer: &ReluNet, inner: &ReluNet) -> Result<ReluNet> {
    if outer.input_dim() != 1 {
        return Err(invalid(format!(
            "outer net takes {} inputs but inner net is scalar",
            outer.input_dim()
        )));
    }
    StackedNet::from(inner.clone())
        .then(&StackedNet::from(outer.clone()))?
        .into_scalar()
}

/// Equalizes depth by appending identity layers.
///
/// For `k = target − depth ≥ 1` added layers the parameter count changes by
/// `2·nnz(a) + 4 + 6(k − 1) − len(a)` where `a` is the original readout.
pub fn pad_depth(net: &ReluNet, target_depth: usize) -> Result<ReluNet> {
    if target_depth == net.depth() {
        return Ok(net.clone());
    }
    StackedNet::from(net.clone())
        .pad_depth(target_depth)?
        .into_scalar()
}
