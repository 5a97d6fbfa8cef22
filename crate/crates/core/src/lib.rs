//! Explicit constructions of deep ReLU networks.
//!
//! The crate builds exact data interpolants from a teacher net, the
//! narrow-bump "bad" interpolant, product gates, and the linear spaces of
//! gated hat functions used for rate experiments. Every construction comes
//! with numerical checks in [`analysis`].

pub mod analysis;
pub mod approx_space;
pub mod cli;
pub mod dataset;
pub mod deepen;
pub mod error;
pub mod gate;
pub mod net;
pub mod primitives;
pub mod synth;
pub mod trainer;

pub use error::{Error, Result};
pub use net::{AffineMap, NetSummary, ReluNet, StackedNet};
