use std::collections::BTreeSet;

use serde::Serialize;

use super::TruthSet;
use crate::error::{Error, Result};
use crate::pipeline::{AnalysisReport, Pathway};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct FamilyCounts {
    pub tp: usize,
    pub fp: usize,
    /// True mediators in this family.
    pub t: usize,
    /// Significant records in this family.
    pub r: usize,
}

impl FamilyCounts {
    pub fn power(&self) -> f64 {
        if self.t == 0 {
            0.0
        } else {
            self.tp as f64 / self.t as f64
        }
    }

    /// FP/R, or 0 when nothing was called.
    pub fn fdr(&self) -> f64 {
        if self.r == 0 {
            0.0
        } else {
            self.fp as f64 / self.r as f64
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Score {
    pub m: FamilyCounts,
    pub f: FamilyCounts,
}

fn family(report: &AnalysisReport, pathway: Pathway, truth: &BTreeSet<String>) -> FamilyCounts {
    let called: BTreeSet<&str> = report
        .significant()
        .filter(|r| r.pathway == pathway)
        .map(|r| r.gene.as_str())
        .collect();
    let tp = called.iter().filter(|g| truth.contains(**g)).count();
    FamilyCounts {
        tp,
        fp: called.len() - tp,
        t: truth.len(),
        r: called.len(),
    }
}

/// TP/FP/T/R per pathway family for one replicate.
pub fn score(report: &AnalysisReport, truth: &TruthSet) -> Result<Score> {
    let known: BTreeSet<&str> = truth.gene_ids.iter().map(String::as_str).collect();
    if let Some(r) = report.records.iter().find(|r| !known.contains(r.gene.as_str())) {
        return Err(Error::IndexMismatch(format!(
            "report gene `{}` is not in the generated gene set",
            r.gene
        )));
    }
    Ok(Score {
        m: family(report, Pathway::M, &truth.true_m),
        f: family(report, Pathway::F, &truth.true_f),
    })
}
