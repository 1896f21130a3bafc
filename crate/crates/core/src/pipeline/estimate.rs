use log::warn;
use rayon::prelude::*;

use super::screen::ScreeningSets;
use super::{base_design, mediator_column, Pathway, PipelineConfig, EXPOSURE_TERM};
use crate::error::{Error, Result};
use crate::ingest::{GeneSummaries, PhenotypeTable};
use crate::regression::{CoefficientEstimate, OlsFit, OlsSolver};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MediatorKey {
    pub gene: String,
    pub pathway: Pathway,
}

impl MediatorKey {
    pub fn term(&self) -> String {
        self.pathway.term(&self.gene)
    }
}

#[derive(Debug, Clone)]
pub struct FinalModels {
    pub outcome: OlsFit,
    /// Mediator-model fits in outcome-design order.
    pub mediators: Vec<(MediatorKey, OlsFit)>,
    /// Mediator terms dropped from the outcome design for collinearity.
    pub dropped_terms: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IieEstimate {
    pub gene: String,
    pub pathway: Pathway,
    pub beta_outcome: CoefficientEstimate,
    pub coef_exposure: CoefficientEstimate,
    /// Per unit change in exposure.
    pub iie: f64,
}

/// Step II model fits: the outcome model on X, Z and the selected mediator
/// terms, and one mediator model per selected term.
pub fn fit_final_models(
    summaries: &GeneSummaries,
    pheno: &PhenotypeTable,
    screening: &ScreeningSets,
    config: &PipelineConfig,
) -> Result<FinalModels> {
    let base = base_design(pheno)?;
    let n_base = base.n_cols();
    let mut design = base.clone();
    let mut keys = Vec::new();
    for (g, pathway) in screening.terms() {
        let key = MediatorKey {
            gene: summaries.gene_ids[g].clone(),
            pathway,
        };
        design.push_column(key.term(), &mediator_column(summaries, g, pathway))?;
        keys.push((g, key));
    }

    let mut dropped_terms = Vec::new();
    let outcome = loop {
        match OlsSolver::with_covariance(&design, config.covariance).and_then(|s| s.fit(&pheno.outcome)) {
            Ok(fit) => break fit,
            Err(Error::RankDeficient { column, index }) if index >= n_base => {
                warn!("dropping collinear mediator term `{column}` from the outcome model");
                design = design.without_column(index);
                keys.retain(|(_, k)| k.term() != column);
                dropped_terms.push(column);
            }
            Err(e) => return Err(e),
        }
    };

    let solver = OlsSolver::with_covariance(&base, config.covariance)?;
    let mediators = keys
        .par_iter()
        .map(|(g, key)| {
            let fit = solver
                .fit(&mediator_column(summaries, *g, key.pathway))
                .map_err(|e| e.for_gene(&key.gene))?;
            Ok((key.clone(), fit))
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(FinalModels {
        outcome,
        mediators,
        dropped_terms,
    })
}

/// Interventional indirect effects as products of the outcome-model mediator
/// coefficient and the mediator-model exposure coefficient.
pub fn estimate_iie(outcome: &OlsFit, mediators: &[(MediatorKey, OlsFit)]) -> Result<Vec<IieEstimate>> {
    mediators
        .iter()
        .map(|(key, fit)| {
            let term = key.term();
            let beta = outcome
                .coefficient(&term)
                .ok_or_else(|| Error::KeyMismatch(format!("outcome model has no term `{term}`")))?;
            let exposure = fit
                .coefficient(EXPOSURE_TERM)
                .ok_or_else(|| Error::KeyMismatch(format!("mediator model for `{term}` has no exposure term")))?;
            Ok(IieEstimate {
                gene: key.gene.clone(),
                pathway: key.pathway,
                iie: beta.estimate * exposure.estimate,
                beta_outcome: beta.clone(),
                coef_exposure: exposure.clone(),
            })
        })
        .collect()
}
