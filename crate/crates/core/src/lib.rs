//! Explanation-based verification of node unlearning in graph neural networks.
//!
//! A run trains a two-layer GCN or GAT, snapshots its explanation artifacts
//! (gradient saliency, k-hop proxy graph, surrogate rules, member and
//! non-member losses), applies an unlearning strategy, snapshots again and
//! scores the difference.

pub mod error;
pub mod explain;
pub mod gnn;
pub mod graph;
pub mod metrics;
pub mod rng;
pub mod runner;
pub mod unlearning;

pub use error::{Error, Result};
