//! Screening (Step I), indirect-effect estimation (Step II) and
//! joint-significance testing with BH control (Step III), plus the per-gene
//! naive comparator.

mod estimate;
mod report;
mod run;
mod screen;
mod testing;

use std::fmt;

use serde::Serialize;

use crate::error::Result;
use crate::ingest::{GeneSummaries, PhenotypeTable};
use crate::regression::{Covariance, DesignMatrix, LassoConfig};

pub use estimate::{estimate_iie, fit_final_models, FinalModels, IieEstimate, MediatorKey};
pub use report::{write_results_tsv, AnalysisReport, MediationRecord, StepTimings, RESULTS_HEADER};
pub use run::{run_naive, run_quasimed};
pub use screen::{default_k_top, screen, ScreeningSets};
pub use testing::{bh_adjust, js_test};

pub const EXPOSURE_TERM: &str = "X";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Pathway {
    /// Mean expression over expressing cells.
    M,
    /// Fraction of expressing cells.
    F,
}

impl Pathway {
    pub fn term(self, gene: &str) -> String {
        format!("{self}:{gene}")
    }
}

impl fmt::Display for Pathway {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pathway::M => "M",
            Pathway::F => "F",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    QuasiMed,
    Naive,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::QuasiMed => "quasimed",
            Method::Naive => "naive",
        })
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "quasimed" => Ok(Method::QuasiMed),
            "naive" => Ok(Method::Naive),
            other => Err(format!("unknown method `{other}` (expected quasimed or naive)")),
        }
    }
}

/// How BH adjustment groups the records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BhFamily {
    /// Separately within the M records and within the F records.
    #[default]
    PerPathway,
    /// All records together.
    Joint,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineConfig {
    pub fdr: f64,
    pub lasso: LassoConfig,
    /// Overrides ⌈n / ln n⌉ for the marginal screens.
    pub k_top: Option<usize>,
    pub bh_family: BhFamily,
    pub covariance: Covariance,
    pub min_subjects: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            fdr: 0.05,
            lasso: LassoConfig::default(),
            k_top: None,
            bh_family: BhFamily::PerPathway,
            covariance: Covariance::Classical,
            min_subjects: 20,
        }
    }
}

/// Intercept, exposure and covariates.
pub(crate) fn base_design(pheno: &PhenotypeTable) -> Result<DesignMatrix> {
    let mut d = DesignMatrix::new(pheno.n());
    d.push_intercept()?;
    d.push_column(EXPOSURE_TERM, &pheno.exposure)?;
    for (name, col) in pheno.covariate_names.iter().zip(&pheno.covariates) {
        d.push_column(format!("Z:{name}"), col)?;
    }
    Ok(d)
}

pub(crate) fn mediator_column(summaries: &GeneSummaries, gene: usize, pathway: Pathway) -> Vec<f64> {
    match pathway {
        Pathway::M => summaries.log_m(gene),
        Pathway::F => summaries.logit_f(gene),
    }
}
