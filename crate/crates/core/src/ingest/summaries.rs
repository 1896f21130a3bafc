use rayon::prelude::*;
use serde::Serialize;

use super::expression::ExpressionMatrix;
use super::phenotype::PhenotypeTable;
use crate::error::{Error, Result};

/// Bounds applied to the expressed proportion before the logit transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClampBounds {
    pub lower: f64,
    pub upper: f64,
}

impl Default for ClampBounds {
    fn default() -> Self {
        ClampBounds {
            lower: 0.001,
            upper: 0.999,
        }
    }
}

impl ClampBounds {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.lower && self.lower < self.upper && self.upper < 1.0) {
            return Err(Error::ConfigInvalid(format!(
                "clamp bounds must satisfy 0 < lower < upper < 1, got ({}, {})",
                self.lower, self.upper
            )));
        }
        Ok(())
    }

    pub fn apply(&self, f: f64) -> f64 {
        f.max(self.lower).min(self.upper)
    }
}

/// Count of strictly positive values and their mean (0 when there are none).
///
/// Values are summed in sorted order so the result does not depend on the
/// order cells were listed in.
pub fn summarize_cells(values: &mut [f64]) -> (u32, f64) {
    values.sort_unstable_by(f64::total_cmp);
    let mut count = 0u32;
    let mut sum = 0.0;
    for &v in values.iter().filter(|v| **v > 0.0) {
        count += 1;
        sum += v;
    }
    if count == 0 {
        (0, 0.0)
    } else {
        (count, sum / count as f64)
    }
}

/// Subject-level co-mediators per gene: mean expression over expressing cells
/// and the fraction of expressing cells. Storage is gene-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneSummaries {
    pub gene_ids: Vec<String>,
    pub subject_ids: Vec<String>,
    pub n_cells: Vec<u32>,
    expressed: Vec<u32>,
    mean_positive: Vec<f64>,
    pub degenerate_f: Vec<bool>,
    pub clamp: ClampBounds,
}

impl GeneSummaries {
    /// Assemble from per-gene (expressing-cell count, mean over expressing
    /// cells) vectors aligned with `subject_ids`.
    pub fn from_parts(
        gene_ids: Vec<String>,
        subject_ids: Vec<String>,
        n_cells: Vec<u32>,
        per_gene: Vec<(Vec<u32>, Vec<f64>)>,
        clamp: ClampBounds,
    ) -> Result<Self> {
        clamp.validate()?;
        let n = subject_ids.len();
        if n_cells.len() != n || per_gene.len() != gene_ids.len() {
            return Err(Error::DimensionMismatch("gene summary parts differ in size".into()));
        }
        if let Some(i) = n_cells.iter().position(|&c| c == 0) {
            return Err(Error::DimensionMismatch(format!("subject `{}` has no cells", subject_ids[i])));
        }
        let mut expressed = Vec::with_capacity(n * gene_ids.len());
        let mut mean_positive = Vec::with_capacity(n * gene_ids.len());
        let mut degenerate_f = Vec::with_capacity(gene_ids.len());
        for (g, (counts, means)) in per_gene.into_iter().enumerate() {
            if counts.len() != n || means.len() != n {
                return Err(Error::DimensionMismatch(format!("gene `{}` has wrong subject count", gene_ids[g])));
            }
            if counts.iter().zip(&n_cells).any(|(c, t)| c > t) {
                return Err(Error::DimensionMismatch(format!("gene `{}` has more expressing than total cells", gene_ids[g])));
            }
            degenerate_f.push(counts.iter().zip(&n_cells).all(|(c, t)| c == t));
            expressed.extend(counts);
            mean_positive.extend(means);
        }
        Ok(GeneSummaries {
            gene_ids,
            subject_ids,
            n_cells,
            expressed,
            mean_positive,
            degenerate_f,
            clamp,
        })
    }

    pub fn n_subjects(&self) -> usize {
        self.subject_ids.len()
    }

    pub fn n_genes(&self) -> usize {
        self.gene_ids.len()
    }

    fn at(&self, g: usize, i: usize) -> usize {
        g * self.n_subjects() + i
    }

    pub fn expressed_cells(&self, g: usize, i: usize) -> u32 {
        self.expressed[self.at(g, i)]
    }

    /// Mean over expressing cells; `None` when the subject has none.
    pub fn mean_expression(&self, g: usize, i: usize) -> Option<f64> {
        let k = self.at(g, i);
        (self.expressed[k] > 0).then(|| self.mean_positive[k])
    }

    pub fn f_raw(&self, g: usize, i: usize) -> f64 {
        self.expressed_cells(g, i) as f64 / self.n_cells[i] as f64
    }

    pub fn f_clamped(&self, g: usize, i: usize) -> f64 {
        self.clamp.apply(self.f_raw(g, i))
    }

    /// log(M_g) per subject, 0 (M_g imputed as 1) where the gene is
    /// unexpressed in that subject.
    pub fn log_m(&self, g: usize) -> Vec<f64> {
        (0..self.n_subjects())
            .map(|i| self.mean_expression(g, i).map_or(0.0, f64::ln))
            .collect()
    }

    /// logit of the clamped expressed proportion per subject.
    pub fn logit_f(&self, g: usize) -> Vec<f64> {
        (0..self.n_subjects())
            .map(|i| {
                let f = self.f_clamped(g, i);
                (f / (1.0 - f)).ln()
            })
            .collect()
    }

    pub fn imputed_count(&self, g: usize) -> usize {
        (0..self.n_subjects()).filter(|&i| self.expressed_cells(g, i) == 0).count()
    }

    pub fn imputed_fraction(&self, g: usize) -> f64 {
        self.imputed_count(g) as f64 / self.n_subjects() as f64
    }

    pub fn gene_index(&self, id: &str) -> Option<usize> {
        self.gene_ids.iter().position(|g| g == id)
    }

    pub fn select_genes(&self, genes: &[usize]) -> GeneSummaries {
        let n = self.n_subjects();
        let mut expressed = Vec::with_capacity(genes.len() * n);
        let mut mean_positive = Vec::with_capacity(genes.len() * n);
        for &g in genes {
            expressed.extend_from_slice(&self.expressed[g * n..(g + 1) * n]);
            mean_positive.extend_from_slice(&self.mean_positive[g * n..(g + 1) * n]);
        }
        GeneSummaries {
            gene_ids: genes.iter().map(|&g| self.gene_ids[g].clone()).collect(),
            subject_ids: self.subject_ids.clone(),
            n_cells: self.n_cells.clone(),
            expressed,
            mean_positive,
            degenerate_f: genes.iter().map(|&g| self.degenerate_f[g]).collect(),
            clamp: self.clamp,
        }
    }

    /// Genes with no expressing cell in any subject.
    pub fn never_expressed(&self) -> Vec<usize> {
        let n = self.n_subjects();
        (0..self.n_genes())
            .filter(|&g| self.expressed[g * n..(g + 1) * n].iter().all(|&c| c == 0))
            .collect()
    }
}

/// Per-subject cell index lists aligned with the phenotype rows, plus the
/// number of cells whose subject is absent from the table.
pub fn cells_by_subject(expr: &ExpressionMatrix, pheno: &PhenotypeTable) -> (Vec<Vec<usize>>, usize) {
    let index = pheno.index();
    let mut by_subject = vec![Vec::new(); pheno.n()];
    let mut unknown = 0;
    for (c, s) in expr.cell_subjects().iter().enumerate() {
        match index.get(s.as_str()) {
            Some(&i) => by_subject[i].push(c),
            None => unknown += 1,
        }
    }
    (by_subject, unknown)
}

/// Aggregate cell-level expression into subject-level summaries. Subjects are
/// ordered as in the phenotype table; cells of unknown subjects are ignored.
pub fn aggregate(expr: &ExpressionMatrix, pheno: &PhenotypeTable, clamp: ClampBounds) -> Result<GeneSummaries> {
    clamp.validate()?;
    let (by_subject, _) = cells_by_subject(expr, pheno);
    let mut subject_of = vec![usize::MAX; expr.n_cells()];
    for (i, cells) in by_subject.iter().enumerate() {
        for &c in cells {
            subject_of[c] = i;
        }
    }
    let n_cells: Vec<u32> = by_subject.iter().map(|c| c.len() as u32).collect();
    let n = pheno.n();
    let per_gene: Vec<(Vec<u32>, Vec<f64>)> = (0..expr.n_genes())
        .into_par_iter()
        .map(|g| {
            let mut buckets: Vec<Vec<f64>> = vec![Vec::new(); n];
            for (c, v) in expr.gene_entries(g) {
                let i = subject_of[c];
                if i != usize::MAX {
                    buckets[i].push(v);
                }
            }
            let mut counts = Vec::with_capacity(n);
            let mut means = Vec::with_capacity(n);
            for b in &mut buckets {
                let (k, m) = summarize_cells(b);
                counts.push(k);
                means.push(m);
            }
            (counts, means)
        })
        .collect();
    GeneSummaries::from_parts(
        expr.gene_ids().to_vec(),
        pheno.subject_ids.clone(),
        n_cells,
        per_gene,
        clamp,
    )
}
