use std::io::Write;

use serde::Serialize;
use serde_json::{json, Value};

use super::screen::ScreeningSets;
use super::{Method, Pathway, PipelineConfig};
use crate::regression::CoefficientEstimate;

pub const RESULTS_HEADER: &str = "gene\tpathway\tbeta_outcome\tse_outcome\tp_outcome\tcoef_exposure\tse_exposure\tp_exposure\tiie\tp_max\tq_bh\tsignificant\timputed_frac";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MediationRecord {
    pub gene: String,
    pub pathway: Pathway,
    pub beta_outcome: CoefficientEstimate,
    pub coef_exposure: CoefficientEstimate,
    pub iie: f64,
    pub p_max: f64,
    pub q_bh: f64,
    pub significant: bool,
    /// Fraction of subjects whose log(M) was imputed for this gene.
    pub imputed_frac: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct StepTimings {
    pub screening: f64,
    pub estimation: f64,
    pub testing: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisReport {
    pub method: Method,
    pub records: Vec<MediationRecord>,
    pub direct_effect: CoefficientEstimate,
    /// `None` for the naive comparator, which does no screening.
    pub screening: Option<ScreeningSets>,
    pub config: PipelineConfig,
    pub timings: StepTimings,
    pub n_subjects: usize,
    pub n_genes: usize,
    pub degenerate_f_genes: usize,
    pub imputed_entries: usize,
    pub dropped_terms: Vec<String>,
}

impl AnalysisReport {
    pub fn significant(&self) -> impl Iterator<Item = &MediationRecord> {
        self.records.iter().filter(|r| r.significant)
    }

    pub fn significant_count(&self, pathway: Pathway) -> usize {
        self.significant().filter(|r| r.pathway == pathway).count()
    }

    /// Deterministic run summary; wall-clock timings are kept out so reruns
    /// compare byte for byte.
    pub fn summary(&self) -> Value {
        let screening = self.screening.as_ref().map(|s| {
            json!({
                "k_top": s.k_top,
                "lasso_lambda": s.chosen_lambda,
                "G_Y": s.g_y.len(),
                "G_M": s.g_m.len(),
                "G_F": s.g_f.len(),
                "S": s.s.len(),
                "M_terms": s.include_m.len(),
                "F_terms": s.include_f.len(),
            })
        });
        json!({
            "method": self.method,
            "config": self.config,
            "n_subjects": self.n_subjects,
            "n_genes": self.n_genes,
            "screening": screening,
            "direct_effect": {
                "estimate": self.direct_effect.estimate,
                "std_error": self.direct_effect.std_error,
                "p_value": self.direct_effect.p_value,
            },
            "records": self.records.len(),
            "significant_M": self.significant_count(Pathway::M),
            "significant_F": self.significant_count(Pathway::F),
            "degenerate_f_genes": self.degenerate_f_genes,
            "imputed_entries": self.imputed_entries,
            "dropped_terms": self.dropped_terms,
        })
    }
}

pub fn write_results_tsv<W: Write>(report: &AnalysisReport, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{RESULTS_HEADER}")?;
    for r in &report.records {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.gene,
            r.pathway,
            r.beta_outcome.estimate,
            r.beta_outcome.std_error,
            r.beta_outcome.p_value,
            r.coef_exposure.estimate,
            r.coef_exposure.std_error,
            r.coef_exposure.p_value,
            r.iie,
            r.p_max,
            r.q_bh,
            r.significant,
            r.imputed_frac,
        )?;
    }
    Ok(())
}
