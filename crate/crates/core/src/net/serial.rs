//! Text serialization of [`ReluNet`].
//!
//! ```text
//! {"input_dim": d,
//!  "layers": [{"rows": r, "cols": c, "weights": [row-major r*c], "bias": [r]}, ...],
//!  "readout": [d_L]}
//! ```
//!
//! Reals are printed with 17 significant digits so that parsing returns the
//! same bits. Layers too large to write densely use `"entries": [[row, col,
//! weight], ...]` in place of `"weights"`; the reader accepts either.

use std::fmt::Write;

use serde::Deserialize;

use super::{AffineMap, ReluNet};
use crate::error::{Error, Result};

const DENSE_LIMIT: usize = 1 << 20;

fn push_real(out: &mut String, v: f64) {
    write!(out, "{v:.16e}").unwrap();
}

fn push_reals(out: &mut String, vs: impl IntoIterator<Item = f64>) {
    out.push('[');
    for (i, v) in vs.into_iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        push_real(out, v);
    }
    out.push(']');
}

pub(super) fn to_json(net: &ReluNet) -> String {
    let mut out = String::new();
    write!(out, "{{\"input_dim\":{},\"layers\":[", net.input_dim()).unwrap();
    for (l, layer) in net.layers().iter().enumerate() {
        if l > 0 {
            out.push(',');
        }
        write!(
            out,
            "\n{{\"rows\":{},\"cols\":{},",
            layer.rows(),
            layer.cols()
        )
        .unwrap();
        if layer.rows() * layer.cols() <= DENSE_LIMIT {
            out.push_str("\"weights\":");
            push_reals(&mut out, layer.to_dense());
        } else {
            out.push_str("\"entries\":[");
            let mut first = true;
            for r in 0..layer.rows() {
                for (c, w) in layer.row(r) {
                    if !first {
                        out.push(',');
                    }
                    first = false;
                    write!(out, "[{r},{c},").unwrap();
                    push_real(&mut out, w);
                    out.push(']');
                }
            }
            out.push(']');
        }
        out.push_str(",\"bias\":");
        push_reals(&mut out, layer.bias().iter().copied());
        out.push('}');
    }
    out.push_str("],\n\"readout\":");
    push_reals(&mut out, net.readout().iter().copied());
    out.push_str("}\n");
    out
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLayer {
    rows: usize,
    cols: usize,
    #[serde(default)]
    weights: Option<Vec<f64>>,
    #[serde(default)]
    entries: Option<Vec<(usize, usize, f64)>>,
    bias: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNet {
    input_dim: usize,
    layers: Vec<RawLayer>,
    readout: Vec<f64>,
}

fn byte_offset(bytes: &[u8], line: usize, column: usize) -> usize {
    let mut offset = 0;
    for (i, l) in bytes.split(|&b| b == b'\n').enumerate() {
        if i + 1 == line {
            return offset + column.saturating_sub(1);
        }
        offset += l.len() + 1;
    }
    bytes.len()
}

pub(super) fn from_json(bytes: &[u8]) -> Result<ReluNet> {
    let raw: RawNet = serde_json::from_slice(bytes).map_err(|e| Error::Parse {
        offset: byte_offset(bytes, e.line(), e.column()),
        message: e.to_string(),
    })?;
    let structural = |message: String| Error::Parse { offset: 0, message };
    let mut layers = Vec::with_capacity(raw.layers.len());
    for (l, layer) in raw.layers.into_iter().enumerate() {
        let map = match (layer.weights, layer.entries) {
            (Some(w), None) => AffineMap::from_dense(layer.rows, layer.cols, &w, layer.bias),
            (None, Some(entries)) => {
                let mut rows = vec![Vec::new(); layer.rows];
                for (r, c, w) in entries {
                    if r >= layer.rows {
                        return Err(structural(format!("layer {l}: entry row {r} out of range")));
                    }
                    rows[r].push((c, w));
                }
                AffineMap::from_rows(layer.cols, rows, layer.bias)
            }
            _ => {
                return Err(structural(format!(
                    "layer {l}: exactly one of \"weights\" or \"entries\" is required"
                )))
            }
        }
        .map_err(|e| structural(format!("layer {l}: {e}")))?;
        layers.push(map);
    }
    ReluNet::new(raw.input_dim, layers, raw.readout).map_err(|e| structural(e.to_string()))
}
