//! ZINB data generator, power/FDR scoring and the method benchmark.

mod benchmark;
mod generate;
mod score;
mod stream;

use std::collections::BTreeSet;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::ClampBounds;

pub use benchmark::{run_benchmark, run_method, write_metrics_tsv, MetricsReport, ReplicateRecord, METRICS_HEADER};
pub use generate::{cell_counts, gen_dataset, gene_id, write_dataset, SimDataset};
pub use score::{score, FamilyCounts, Score};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Range {
    pub low: f64,
    pub high: f64,
}

impl Range {
    pub const fn new(low: f64, high: f64) -> Self {
        Range { low, high }
    }

    fn validate(&self, what: &str) -> Result<()> {
        if !(self.low.is_finite() && self.high.is_finite() && self.low <= self.high) {
            return Err(Error::ConfigInvalid(format!(
                "{what} range ({}, {}) must be finite with low ≤ high",
                self.low, self.high
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimConfig {
    pub n: usize,
    pub genes: usize,
    pub cells: usize,
    pub replicates: usize,
    pub seed: u64,
    /// Exposure effect on the zero-inflation logit.
    pub alpha_range: Range,
    /// Exposure effect on the log NB mean.
    pub gamma_range: Range,
    pub beta_m_range: Range,
    pub beta_f_range: Range,
    pub dispersion_range: Range,
    pub beta_x: f64,
    /// 0-based indices of genes acting through M.
    pub true_m: BTreeSet<usize>,
    /// 0-based indices of genes acting through F.
    pub true_f: BTreeSet<usize>,
    pub clamp: ClampBounds,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n: 200,
            genes: 10_000,
            cells: 40,
            replicates: 1,
            seed: 0,
            alpha_range: Range::new(0.2, 0.4),
            gamma_range: Range::new(0.2, 0.4),
            beta_m_range: Range::new(0.8, 1.1),
            beta_f_range: Range::new(0.8, 1.1),
            dispersion_range: Range::new(0.6, 1.2),
            beta_x: 3.0,
            true_m: (0..8).collect(),
            true_f: (0..4).chain(8..12).collect(),
            clamp: ClampBounds::default(),
        }
    }
}

impl SimConfig {
    /// Every exposure and mediator effect set to zero, and empty truth sets.
    pub fn null(mut self) -> Self {
        let zero = Range::new(0.0, 0.0);
        self.alpha_range = zero;
        self.gamma_range = zero;
        self.beta_m_range = zero;
        self.beta_f_range = zero;
        self.true_m.clear();
        self.true_f.clear();
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::ConfigInvalid(format!("need at least 2 subjects, got {}", self.n)));
        }
        if self.genes == 0 {
            return Err(Error::ConfigInvalid("gene count must be positive".into()));
        }
        if self.cells == 0 {
            return Err(Error::ConfigInvalid("cells per subject must be positive".into()));
        }
        if self.replicates == 0 {
            return Err(Error::ConfigInvalid("replicate count must be at least 1".into()));
        }
        if self.n > u32::MAX as usize || self.genes > u32::MAX as usize {
            return Err(Error::ConfigInvalid("subject and gene counts must fit in 32 bits".into()));
        }
        self.alpha_range.validate("alpha")?;
        self.gamma_range.validate("gamma")?;
        self.beta_m_range.validate("beta_M")?;
        self.beta_f_range.validate("beta_F")?;
        self.dispersion_range.validate("dispersion")?;
        if self.dispersion_range.low <= 0.0 {
            return Err(Error::ConfigInvalid("dispersion must be positive".into()));
        }
        if !self.beta_x.is_finite() {
            return Err(Error::ConfigInvalid("beta_X must be finite".into()));
        }
        if let Some(&g) = self.true_m.iter().chain(&self.true_f).find(|&&g| g >= self.genes) {
            return Err(Error::ConfigInvalid(format!(
                "true mediator gene{} is outside 1..{}",
                g + 1,
                self.genes
            )));
        }
        self.clamp.validate()
    }
}

/// Ground truth for one generated replicate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruthSet {
    /// Gene ids of true M-pathway mediators.
    pub true_m: BTreeSet<String>,
    /// Gene ids of true F-pathway mediators.
    pub true_f: BTreeSet<String>,
    /// Drawn per-gene parameters, indexed by generated gene (before removal).
    pub dispersion: Vec<f64>,
    pub alpha: Vec<f64>,
    pub gamma: Vec<f64>,
    pub beta_m: Vec<f64>,
    pub beta_f: Vec<f64>,
    /// Ids of genes that survived removal of never-expressed genes.
    pub gene_ids: Vec<String>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let c = SimConfig::default();
        c.validate().unwrap();
        assert_eq!(c.true_m.len(), 8);
        assert_eq!(c.true_f.len(), 8);
        c.clone().null().validate().unwrap();
    }

    #[test]
    fn invalid_configs() {
        let bad = [
            SimConfig { genes: 0, ..Default::default() },
            SimConfig { genes: 10, ..Default::default() },
            SimConfig { cells: 0, ..Default::default() },
            SimConfig { replicates: 0, ..Default::default() },
            SimConfig { alpha_range: Range::new(0.4, 0.2), ..Default::default() },
            SimConfig { dispersion_range: Range::new(0.0, 1.0), ..Default::default() },
        ];
        for c in bad {
            assert!(matches!(c.validate(), Err(Error::ConfigInvalid(_))), "{c:?}");
        }
    }
}
