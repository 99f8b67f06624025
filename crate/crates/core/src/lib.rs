//! Per-group face-verification metrics and the Fairness Disagreement Index
//! (FDI), a single number measuring how strongly common fairness metrics
//! disagree about which demographic groups are disadvantaged.
//!
//! The pipeline runs bottom-up: [`verification`] turns embeddings into
//! labeled scores and confusion counts, [`grouping`] partitions identities
//! and routes pairs to groups, [`metrics`] builds the per-group metric table,
//! and [`disagreement`] computes the FDI, threshold sweeps, bootstrap
//! intervals and model comparisons. [`synth`] generates synthetic score
//! populations, [`io`] and [`report`] handle files, and [`pipeline`] wires the
//! command-line runs together.

pub mod disagreement;
pub mod error;
pub mod exec;
pub mod grouping;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod report;
pub mod synth;
pub mod verification;

pub use error::{Error, Result};
pub use exec::Execution;
