use std::time::Instant;

use rayon::prelude::*;

use super::estimate::{estimate_iie, fit_final_models, IieEstimate};
use super::report::{AnalysisReport, MediationRecord, StepTimings};
use super::screen::{check_inputs, screen};
use super::testing::{bh_adjust, js_test};
use super::{base_design, mediator_column, BhFamily, Method, Pathway, PipelineConfig, EXPOSURE_TERM};
use crate::error::{Error, Result};
use crate::ingest::{GeneSummaries, PhenotypeTable};
use crate::regression::{CoefficientEstimate, DesignMatrix, OlsSolver};

/// Step III: joint-significance p-values, BH adjustment and significance calls.
fn test_records(
    estimates: Vec<IieEstimate>,
    summaries: &GeneSummaries,
    config: &PipelineConfig,
) -> Result<Vec<MediationRecord>> {
    let mut records = estimates
        .into_iter()
        .map(|e| {
            let p_max = js_test(e.beta_outcome.p_value, e.coef_exposure.p_value)?;
            let imputed_frac = match e.pathway {
                Pathway::M => summaries
                    .gene_index(&e.gene)
                    .map_or(0.0, |g| summaries.imputed_fraction(g)),
                Pathway::F => 0.0,
            };
            Ok(MediationRecord {
                gene: e.gene,
                pathway: e.pathway,
                beta_outcome: e.beta_outcome,
                coef_exposure: e.coef_exposure,
                iie: e.iie,
                p_max,
                q_bh: 1.0,
                significant: false,
                imputed_frac,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let families: Vec<Vec<usize>> = match config.bh_family {
        BhFamily::PerPathway => [Pathway::M, Pathway::F]
            .iter()
            .map(|&p| (0..records.len()).filter(|&i| records[i].pathway == p).collect())
            .collect(),
        BhFamily::Joint => vec![(0..records.len()).collect()],
    };
    for family in families {
        let p: Vec<f64> = family.iter().map(|&i| records[i].p_max).collect();
        let q = bh_adjust(&p)?;
        for (&i, q) in family.iter().zip(q) {
            records[i].q_bh = q;
            records[i].significant = q <= config.fdr;
        }
    }
    Ok(records)
}

fn direct_effect(pheno: &PhenotypeTable, config: &PipelineConfig) -> Result<CoefficientEstimate> {
    let base = base_design(pheno)?;
    let fit = OlsSolver::with_covariance(&base, config.covariance)?.fit(&pheno.outcome)?;
    Ok(fit.coefficient(EXPOSURE_TERM).expect("exposure in base design").clone())
}

fn imputed_entries(summaries: &GeneSummaries) -> usize {
    (0..summaries.n_genes()).map(|g| summaries.imputed_count(g)).sum()
}

/// Steps I-III on subject-level summaries.
pub fn run_quasimed(summaries: &GeneSummaries, pheno: &PhenotypeTable, config: &PipelineConfig) -> Result<AnalysisReport> {
    let start = Instant::now();
    check_inputs(summaries, pheno, config)?;
    let screening = screen(summaries, pheno, config)?;
    let t_screen = start.elapsed().as_secs_f64();

    let models = fit_final_models(summaries, pheno, &screening, config)?;
    let direct = models
        .outcome
        .coefficient(EXPOSURE_TERM)
        .expect("exposure in outcome design")
        .clone();
    let estimates = estimate_iie(&models.outcome, &models.mediators)?;
    let t_estimate = start.elapsed().as_secs_f64();

    let records = test_records(estimates, summaries, config)?;
    let total = start.elapsed().as_secs_f64();

    Ok(AnalysisReport {
        method: Method::QuasiMed,
        records,
        direct_effect: direct,
        screening: Some(screening),
        config: config.clone(),
        timings: StepTimings {
            screening: t_screen,
            estimation: t_estimate - t_screen,
            testing: total - t_estimate,
            total,
        },
        n_subjects: summaries.n_subjects(),
        n_genes: summaries.n_genes(),
        degenerate_f_genes: summaries.degenerate_f.iter().filter(|d| **d).count(),
        imputed_entries: imputed_entries(summaries),
        dropped_terms: models.dropped_terms,
    })
}

/// Per-gene comparator: for every gene and pathway, the outcome regressed on
/// (1, mediator term, X) and the mediator on (1, X), then the same JS test and
/// BH adjustment across all genes. Terms that are collinear with the exposure
/// or intercept for a gene are skipped.
pub fn run_naive(summaries: &GeneSummaries, pheno: &PhenotypeTable, config: &PipelineConfig) -> Result<AnalysisReport> {
    let start = Instant::now();
    check_inputs(summaries, pheno, config)?;
    let mut mediator_design = DesignMatrix::new(pheno.n());
    mediator_design.push_intercept()?;
    mediator_design.push_column(EXPOSURE_TERM, &pheno.exposure)?;
    let mediator_solver = OlsSolver::with_covariance(&mediator_design, config.covariance)?;

    let tasks: Vec<(usize, Pathway)> = (0..summaries.n_genes())
        .flat_map(|g| {
            let f = (!summaries.degenerate_f[g]).then_some((g, Pathway::F));
            std::iter::once((g, Pathway::M)).chain(f)
        })
        .collect();

    let fitted: Vec<Option<IieEstimate>> = tasks
        .par_iter()
        .map(|&(g, pathway)| {
            let gene = &summaries.gene_ids[g];
            let term = pathway.term(gene);
            let column = mediator_column(summaries, g, pathway);
            let mut design = DesignMatrix::new(pheno.n());
            design.push_intercept()?;
            design.push_column(term.clone(), &column)?;
            design.push_column(EXPOSURE_TERM, &pheno.exposure)?;
            let outcome = match OlsSolver::with_covariance(&design, config.covariance) {
                Ok(s) => s.fit(&pheno.outcome),
                Err(Error::RankDeficient { .. }) => return Ok(None),
                Err(e) => Err(e),
            }
            .map_err(|e| e.for_gene(gene))?;
            let mediator = mediator_solver.fit(&column).map_err(|e| e.for_gene(gene))?;
            let beta = outcome.coefficient(&term).expect("term in design").clone();
            let exposure = mediator.coefficient(EXPOSURE_TERM).expect("exposure in design").clone();
            Ok(Some(IieEstimate {
                gene: gene.clone(),
                pathway,
                iie: beta.estimate * exposure.estimate,
                beta_outcome: beta,
                coef_exposure: exposure,
            }))
        })
        .collect::<Result<Vec<_>>>()?;
    let estimates: Vec<IieEstimate> = fitted.into_iter().flatten().collect();
    let t_estimate = start.elapsed().as_secs_f64();

    let records = test_records(estimates, summaries, config)?;
    let total = start.elapsed().as_secs_f64();

    Ok(AnalysisReport {
        method: Method::Naive,
        records,
        direct_effect: direct_effect(pheno, config)?,
        screening: None,
        config: config.clone(),
        timings: StepTimings {
            screening: 0.0,
            estimation: t_estimate,
            testing: total - t_estimate,
            total,
        },
        n_subjects: summaries.n_subjects(),
        n_genes: summaries.n_genes(),
        degenerate_f_genes: summaries.degenerate_f.iter().filter(|d| **d).count(),
        imputed_entries: imputed_entries(summaries),
        dropped_terms: Vec::new(),
    })
}
