//! Desk-scale graph-attention error mitigation.
//!
//! The crate covers the whole loop: Trotterized TFIM circuits are generated
//! and lowered to the `{ecr, sx, x, id, rz}` gate set ([`circuit`]),
//! simulated under depolarizing noise with zero-noise-extrapolated and exact
//! labels ([`noise`]), turned into gate-instance DAGs with per-measurement
//! causal lightcones ([`graph`]) and descriptor vectors ([`features`]), and
//! fed to a dual-path masked-attention regressor ([`model`]) built on a small
//! reverse-mode tensor engine ([`numeric`]). [`pipeline`] wires these into
//! training, evaluation, ablation and reporting.

pub mod circuit;
pub mod error;
pub mod features;
pub mod graph;
pub mod model;
pub mod noise;
pub mod numeric;
pub mod pipeline;

pub use error::{Error, Result};
