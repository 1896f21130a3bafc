//! Causal mediation analysis for zero-inflated single-cell expression data.
//!
//! Each gene contributes two subject-level co-mediators: the mean expression
//! over expressing cells (`M`) and the fraction of expressing cells (`F`).
//! The pipeline screens candidate genes with a lasso outcome model and
//! marginal exposure models, estimates interventional indirect effects as
//! coefficient products, and tests them with the joint-significance test under
//! Benjamini-Hochberg control. A zero-inflated negative binomial simulator and
//! a per-gene naive comparator are included for benchmarking.

pub mod cli;
pub mod error;
pub mod ingest;
pub mod output;
pub mod pipeline;
pub mod regression;
pub mod sim;

pub use error::{Error, Result};
