use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::Serialize;

use super::{base_design, mediator_column, Pathway, PipelineConfig, EXPOSURE_TERM};
use crate::error::{Error, Result};
use crate::ingest::{GeneSummaries, PhenotypeTable};
use crate::regression::{fit_lasso, OlsSolver};

/// Gene sets produced by screening, as gene indices into the summaries.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScreeningSets {
    /// Genes with a nonzero lasso coefficient on either mediator term.
    pub g_y: BTreeSet<usize>,
    /// Top-ranked genes by marginal exposure |t| on log(M).
    pub g_m: BTreeSet<usize>,
    /// Top-ranked genes by marginal exposure |t| on logit(F).
    pub g_f: BTreeSet<usize>,
    /// (G_Y ∩ G_M) ∪ (G_Y ∩ G_F).
    pub s: BTreeSet<usize>,
    pub include_m: BTreeSet<usize>,
    pub include_f: BTreeSet<usize>,
    pub k_top: usize,
    pub chosen_lambda: f64,
}

impl ScreeningSets {
    /// Derive S and the include flags from the three screens.
    pub fn from_screens(g_y: BTreeSet<usize>, g_m: BTreeSet<usize>, g_f: BTreeSet<usize>, k_top: usize) -> Self {
        let include_m: BTreeSet<usize> = g_y.intersection(&g_m).copied().collect();
        let include_f: BTreeSet<usize> = g_y.intersection(&g_f).copied().collect();
        let s = include_m.union(&include_f).copied().collect();
        ScreeningSets {
            g_y,
            g_m,
            g_f,
            s,
            include_m,
            include_f,
            k_top,
            chosen_lambda: f64::NAN,
        }
    }

    /// Selected (gene, pathway) terms ordered by gene index, M before F.
    pub fn terms(&self) -> Vec<(usize, Pathway)> {
        let mut out = Vec::new();
        for &g in &self.s {
            if self.include_m.contains(&g) {
                out.push((g, Pathway::M));
            }
            if self.include_f.contains(&g) {
                out.push((g, Pathway::F));
            }
        }
        out
    }
}

/// ⌈n / ln n⌉.
pub fn default_k_top(n: usize) -> usize {
    let n = n as f64;
    (n / n.ln()).ceil() as usize
}

pub(crate) fn check_inputs(summaries: &GeneSummaries, pheno: &PhenotypeTable, config: &PipelineConfig) -> Result<()> {
    if summaries.subject_ids != pheno.subject_ids {
        return Err(Error::KeyMismatch("gene summaries and phenotype table list different subjects".into()));
    }
    if pheno.n() < config.min_subjects {
        return Err(Error::TooFewSubjects {
            n: pheno.n(),
            required: config.min_subjects,
        });
    }
    if pheno.distinct_exposures() < 2 {
        return Err(Error::DegenerateExposure);
    }
    if !(config.fdr > 0.0 && config.fdr < 1.0) {
        return Err(Error::ConfigInvalid(format!("FDR level must be in (0, 1), got {}", config.fdr)));
    }
    Ok(())
}

/// Indices of the `k` largest statistics; ties keep the lower gene index.
fn top_k(stats: &[(usize, f64)], k: usize) -> BTreeSet<usize> {
    let mut ranked: Vec<(usize, f64)> = stats.to_vec();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked.into_iter().take(k).map(|(g, _)| g).collect()
}

/// Marginal exposure |t| for every gene on one pathway, using the shared
/// (1, X, Z) design.
pub(crate) fn marginal_stats(
    summaries: &GeneSummaries,
    solver: &OlsSolver,
    pathway: Pathway,
) -> Result<Vec<(usize, f64)>> {
    let genes: Vec<usize> = (0..summaries.n_genes())
        .filter(|&g| pathway == Pathway::M || !summaries.degenerate_f[g])
        .collect();
    genes
        .par_iter()
        .map(|&g| {
            let fit = solver
                .fit(&mediator_column(summaries, g, pathway))
                .map_err(|e| e.for_gene(&summaries.gene_ids[g]))?;
            let x = fit.coefficient(EXPOSURE_TERM).expect("exposure is in the base design");
            Ok((g, x.abs_z()))
        })
        .collect()
}

/// Step I: lasso outcome screen plus marginal exposure screens.
pub fn screen(summaries: &GeneSummaries, pheno: &PhenotypeTable, config: &PipelineConfig) -> Result<ScreeningSets> {
    check_inputs(summaries, pheno, config)?;
    let base = base_design(pheno)?;
    let solver = OlsSolver::with_covariance(&base, config.covariance)?;

    let mut design = base.clone();
    let mut penalized = BTreeSet::new();
    for g in 0..summaries.n_genes() {
        for pathway in [Pathway::M, Pathway::F] {
            if pathway == Pathway::F && summaries.degenerate_f[g] {
                continue;
            }
            let term = pathway.term(&summaries.gene_ids[g]);
            design.push_column(term.clone(), &mediator_column(summaries, g, pathway))?;
            penalized.insert(term);
        }
    }
    let lasso = fit_lasso(&design, &pheno.outcome, &penalized, &config.lasso)?;
    let g_y: BTreeSet<usize> = (0..summaries.n_genes())
        .filter(|&g| {
            let id = &summaries.gene_ids[g];
            lasso.selected_terms.contains(&Pathway::M.term(id)) || lasso.selected_terms.contains(&Pathway::F.term(id))
        })
        .collect();

    let k_top = config.k_top.unwrap_or_else(|| default_k_top(pheno.n()));
    let g_m = top_k(&marginal_stats(summaries, &solver, Pathway::M)?, k_top);
    let g_f = top_k(&marginal_stats(summaries, &solver, Pathway::F)?, k_top);
    let mut sets = ScreeningSets::from_screens(g_y, g_m, g_f, k_top);
    sets.chosen_lambda = lasso.chosen_lambda;
    Ok(sets)
}
