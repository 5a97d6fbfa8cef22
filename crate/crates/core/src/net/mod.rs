//! Deep ReLU networks `x ↦ a · σ(J_L(σ(J_{L-1}(… σ(J_1 x) …))))`.
//!
//! [`ReluNet`] is the scalar-output form used throughout the crate.
//! [`StackedNet`] is the vector-output form that only exists while nets are
//! being wired together (parallel channels feeding a gate, shared bump
//! layers feeding several readouts).
//!
//! Every combinator here is exact in real arithmetic. No combinator inserts
//! an approximation; the only approximate gadget is the product gate.

mod affine;
mod combine;
mod serial;

pub use affine::AffineMap;
pub use combine::{compose_serial, pad_depth, stack_parallel, sum_nets};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Result};

/// Sparse readout row: `(unit index, coefficient)` pairs. Stored entries are
/// counted as free parameters even when their value is zero.
pub(crate) type ReadoutRow = Vec<(usize, f64)>;

#[derive(Clone, Debug, PartialEq)]
pub struct ReluNet {
    input_dim: usize,
    layers: Vec<AffineMap>,
    readout: Vec<f64>,
}

/// Shape and size overview of a net.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NetSummary {
    pub depth: usize,
    pub width_per_layer: Vec<usize>,
    pub free_params: usize,
    /// Stored weights over the dense weight count of all layers.
    pub nonzero_fraction: f64,
}

fn check_chain(input_dim: usize, layers: &[AffineMap]) -> Result<()> {
    if input_dim == 0 {
        return Err(invalid("input_dim must be at least 1"));
    }
    if layers.is_empty() {
        return Err(invalid("a net needs at least one layer"));
    }
    let mut width = input_dim;
    for (l, layer) in layers.iter().enumerate() {
        if layer.cols() != width {
            return Err(invalid(format!(
                "layer {l} expects {} inputs but receives {width}",
                layer.cols()
            )));
        }
        width = layer.rows();
    }
    Ok(())
}

/// Runs the hidden layers and returns the last hidden representation in `a`.
#[inline]
fn forward(layers: &[AffineMap], x: &[f64], a: &mut Vec<f64>, b: &mut Vec<f64>) {
    layers[0].apply_relu(x, a);
    for layer in &layers[1..] {
        layer.apply_relu(a, b);
        std::mem::swap(a, b);
    }
}

fn summary(layers: &[AffineMap], input_dim: usize, free_params: usize) -> NetSummary {
    let mut dense = 0usize;
    let mut nnz = 0usize;
    let mut width = input_dim;
    for l in layers {
        dense += l.rows() * width;
        nnz += l.nnz();
        width = l.rows();
    }
    NetSummary {
        depth: layers.len(),
        width_per_layer: layers.iter().map(AffineMap::rows).collect(),
        free_params,
        nonzero_fraction: if dense == 0 {
            0.0
        } else {
            nnz as f64 / dense as f64
        },
    }
}

fn hidden_params(layers: &[AffineMap]) -> usize {
    layers.iter().map(|l| l.nnz() + l.rows()).sum()
}

impl ReluNet {
    pub fn new(input_dim: usize, layers: Vec<AffineMap>, readout: Vec<f64>) -> Result<Self> {
        check_chain(input_dim, &layers)?;
        let width = layers.last().unwrap().rows();
        if readout.len() != width {
            return Err(invalid(format!(
                "readout has length {}, last layer has {width} units",
                readout.len()
            )));
        }
        if readout.iter().any(|a| !a.is_finite()) {
            return Err(invalid("readout contains non-finite entries"));
        }
        Ok(Self {
            input_dim,
            layers,
            readout,
        })
    }

    /// The identically zero net of the given depth (one unit per layer).
    pub fn zero(input_dim: usize, depth: usize) -> Result<Self> {
        if depth == 0 {
            return Err(invalid("depth must be at least 1"));
        }
        let mut layers = vec![AffineMap::from_rows(input_dim, vec![vec![]], vec![0.0])?];
        for _ in 1..depth {
            layers.push(AffineMap::from_rows(1, vec![vec![]], vec![0.0])?);
        }
        Self::new(input_dim, layers, vec![0.0])
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn layers(&self) -> &[AffineMap] {
        &self.layers
    }

    pub fn readout(&self) -> &[f64] {
        &self.readout
    }

    /// Nonzero weights, plus every bias, plus every readout entry.
    pub fn param_count(&self) -> usize {
        hidden_params(&self.layers) + self.readout.len()
    }

    pub fn summarize(&self) -> NetSummary {
        summary(&self.layers, self.input_dim, self.param_count())
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.input_dim {
            return Err(invalid(format!(
                "input has length {}, net expects {}",
                x.len(),
                self.input_dim
            )));
        }
        if let Some(v) = x.iter().find(|v| !v.is_finite()) {
            return Err(invalid(format!("non-finite input coordinate {v}")));
        }
        Ok(self.eval(x))
    }

    /// Unchecked evaluation for hot loops; `x.len()` must equal `input_dim`.
    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut a = Vec::new();
        let mut b = Vec::new();
        self.eval_with(x, &mut a, &mut b)
    }

    #[inline]
    pub(crate) fn eval_with(&self, x: &[f64], a: &mut Vec<f64>, b: &mut Vec<f64>) -> f64 {
        debug_assert_eq!(x.len(), self.input_dim);
        forward(&self.layers, x, a, b);
        let mut acc = 0.0;
        for (w, h) in self.readout.iter().zip(a.iter()) {
            acc += w * h;
        }
        acc
    }

    /// Evaluates every row; output order matches input order.
    pub fn evaluate_batch(&self, xs: &[Vec<f64>]) -> Result<Vec<f64>> {
        if let Some((i, row)) = xs
            .iter()
            .enumerate()
            .find(|(_, r)| r.len() != self.input_dim)
        {
            return Err(invalid(format!(
                "row {i} has length {}, net expects {}",
                row.len(),
                self.input_dim
            )));
        }
        Ok(xs
            .par_iter()
            .map_init(
                || (Vec::new(), Vec::new()),
                |(a, b), x| self.eval_with(x, a, b),
            )
            .collect())
    }

    pub fn to_json(&self) -> String {
        serial::to_json(self)
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        serial::from_json(bytes)
    }

    pub(crate) fn into_parts(self) -> (usize, Vec<AffineMap>, Vec<f64>) {
        (self.input_dim, self.layers, self.readout)
    }
}

/// Vector-output net: shared hidden layers with one sparse readout row per
/// output channel.
#[derive(Clone, Debug, PartialEq)]
pub struct StackedNet {
    input_dim: usize,
    layers: Vec<AffineMap>,
    readout: Vec<ReadoutRow>,
}

impl StackedNet {
    pub(crate) fn new(
        input_dim: usize,
        layers: Vec<AffineMap>,
        readout: Vec<ReadoutRow>,
    ) -> Result<Self> {
        check_chain(input_dim, &layers)?;
        let width = layers.last().unwrap().rows();
        if readout.is_empty() {
            return Err(invalid("a stacked net needs at least one output"));
        }
        for row in &readout {
            if row.iter().any(|&(j, w)| j >= width || !w.is_finite()) {
                return Err(invalid(
                    "readout row refers to a missing unit or is non-finite",
                ));
            }
        }
        Ok(Self {
            input_dim,
            layers,
            readout,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn outputs(&self) -> usize {
        self.readout.len()
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn layers(&self) -> &[AffineMap] {
        &self.layers
    }

    pub(crate) fn readout_rows(&self) -> &[ReadoutRow] {
        &self.readout
    }

    pub fn param_count(&self) -> usize {
        hidden_params(&self.layers) + self.readout.iter().map(Vec::len).sum::<usize>()
    }

    pub fn summarize(&self) -> NetSummary {
        summary(&self.layers, self.input_dim, self.param_count())
    }

    /// Evaluates all output channels. Panics if `x` has the wrong length.
    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.input_dim, "input dimension mismatch");
        let mut a = Vec::new();
        let mut b = Vec::new();
        forward(&self.layers, x, &mut a, &mut b);
        self.readout
            .iter()
            .map(|row| {
                let mut acc = 0.0;
                for &(j, w) in row {
                    acc += w * a[j];
                }
                acc
            })
            .collect()
    }

    /// Converts a single-output stacked net into the scalar form.
    pub fn into_scalar(self) -> Result<ReluNet> {
        if self.readout.len() != 1 {
            return Err(invalid(format!(
                "net has {} outputs, expected exactly one",
                self.readout.len()
            )));
        }
        let width = self.layers.last().unwrap().rows();
        let mut readout = vec![0.0; width];
        for &(j, w) in &self.readout[0] {
            readout[j] += w;
        }
        ReluNet::new(self.input_dim, self.layers, readout)
    }

    pub(crate) fn into_parts(self) -> (usize, Vec<AffineMap>, Vec<ReadoutRow>) {
        (self.input_dim, self.layers, self.readout)
    }
}

impl From<ReluNet> for StackedNet {
    fn from(net: ReluNet) -> Self {
        let (input_dim, layers, readout) = net.into_parts();
        Self {
            input_dim,
            layers,
            readout: vec![readout.into_iter().enumerate().collect()],
        }
    }
}
