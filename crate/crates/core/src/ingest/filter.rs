use log::{info, warn};
use serde::Serialize;

use super::expression::ExpressionMatrix;
use super::phenotype::PhenotypeTable;
use super::summaries::cells_by_subject;
use crate::error::{Error, Result};

// Fraction comparisons tolerate this much rounding, so 5 of 100 subjects
// meets a 0.05 threshold.
const FRAC_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct FilterReport {
    pub subjects_in: usize,
    pub subjects_removed: usize,
    pub cells_unknown_subject: usize,
    pub genes_in: usize,
    pub genes_never_expressed: usize,
    pub genes_low_prevalence: usize,
    pub genes_high_zero_fraction: usize,
}

/// Drop subjects with fewer than `min_cells` cells from both structures, along
/// with cells whose subject has no phenotype row.
pub fn filter_subjects(
    expr: &ExpressionMatrix,
    pheno: &PhenotypeTable,
    min_cells: usize,
    report: &mut FilterReport,
) -> Result<(ExpressionMatrix, PhenotypeTable)> {
    if min_cells == 0 {
        return Err(Error::ConfigInvalid("min_cells must be at least 1".into()));
    }
    let (by_subject, unknown) = cells_by_subject(expr, pheno);
    if unknown > 0 {
        warn!("{unknown} cells belong to subjects without phenotype rows and were dropped");
    }
    let keep: Vec<usize> = (0..pheno.n()).filter(|&i| by_subject[i].len() >= min_cells).collect();
    report.subjects_in = pheno.n();
    report.subjects_removed = pheno.n() - keep.len();
    report.cells_unknown_subject = unknown;
    if keep.is_empty() {
        return Err(Error::NoSubjectsRemain { min_cells });
    }
    info!(
        "subject filter: kept {} of {} subjects with at least {min_cells} cells",
        keep.len(),
        pheno.n()
    );
    let mut cells: Vec<usize> = keep.iter().flat_map(|&i| by_subject[i].iter().copied()).collect();
    cells.sort_unstable();
    Ok((expr.select_cells(&cells), pheno.select(&keep)))
}

/// Keep genes expressed in at least `min_subject_frac` of subjects whose
/// overall cell-level zero fraction is at most `max_zero_frac`. Genes with no
/// expressing cell anywhere are always removed.
pub fn filter_genes(
    expr: &ExpressionMatrix,
    pheno: &PhenotypeTable,
    min_subject_frac: f64,
    max_zero_frac: f64,
    report: &mut FilterReport,
) -> Result<ExpressionMatrix> {
    for (name, v) in [("min_subject_frac", min_subject_frac), ("max_zero_frac", max_zero_frac)] {
        if !(v > 0.0 && v <= 1.0) {
            return Err(Error::ConfigInvalid(format!("{name} must be in (0, 1], got {v}")));
        }
    }
    let (by_subject, _) = cells_by_subject(expr, pheno);
    let mut subject_of = vec![usize::MAX; expr.n_cells()];
    for (i, cells) in by_subject.iter().enumerate() {
        for &c in cells {
            subject_of[c] = i;
        }
    }
    let total_cells: usize = by_subject.iter().map(Vec::len).sum();
    let n = pheno.n();
    report.genes_in = expr.n_genes();
    let mut keep = Vec::new();
    let mut seen = vec![false; n];
    for g in 0..expr.n_genes() {
        seen.iter_mut().for_each(|s| *s = false);
        let mut positive_cells = 0usize;
        for (c, v) in expr.gene_entries(g) {
            let i = subject_of[c];
            if i != usize::MAX && v > 0.0 {
                seen[i] = true;
                positive_cells += 1;
            }
        }
        if positive_cells == 0 {
            report.genes_never_expressed += 1;
            continue;
        }
        let subjects = seen.iter().filter(|s| **s).count();
        if (subjects as f64) < min_subject_frac * n as f64 - FRAC_EPS {
            report.genes_low_prevalence += 1;
            continue;
        }
        let zero_frac = 1.0 - positive_cells as f64 / total_cells as f64;
        if zero_frac > max_zero_frac + FRAC_EPS {
            report.genes_high_zero_fraction += 1;
            continue;
        }
        keep.push(g);
    }
    if keep.is_empty() {
        return Err(Error::NoGenesRemain);
    }
    info!("gene filter: kept {} of {} genes", keep.len(), expr.n_genes());
    Ok(expr.select_genes(&keep))
}
