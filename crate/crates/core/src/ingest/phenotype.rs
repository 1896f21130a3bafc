use std::collections::{HashMap, HashSet};
use std::path::Path;

use log::warn;
use serde::Serialize;

use super::expression::{open_lines, parse_error};
use crate::error::{Error, Result};

/// Per-subject outcome, exposure and covariates, in row order.
#[derive(Debug, Clone, PartialEq)]
pub struct PhenotypeTable {
    pub subject_ids: Vec<String>,
    pub outcome: Vec<f64>,
    pub exposure: Vec<f64>,
    pub covariate_names: Vec<String>,
    /// One vector per covariate, aligned with `subject_ids`.
    pub covariates: Vec<Vec<f64>>,
    /// Rows dropped at load because the outcome or exposure was missing.
    pub dropped_missing: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhenotypeColumns {
    pub subject: String,
    pub outcome: String,
    pub exposure: String,
    pub covariates: Vec<String>,
}

impl Default for PhenotypeColumns {
    fn default() -> Self {
        PhenotypeColumns {
            subject: "subject_id".into(),
            outcome: "y".into(),
            exposure: "x".into(),
            covariates: Vec::new(),
        }
    }
}

impl PhenotypeTable {
    pub fn new(
        subject_ids: Vec<String>,
        outcome: Vec<f64>,
        exposure: Vec<f64>,
        covariate_names: Vec<String>,
        covariates: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let n = subject_ids.len();
        if outcome.len() != n || exposure.len() != n || covariates.iter().any(|c| c.len() != n) {
            return Err(Error::DimensionMismatch("phenotype columns differ in length".into()));
        }
        if covariate_names.len() != covariates.len() {
            return Err(Error::DimensionMismatch("covariate names and columns differ in count".into()));
        }
        let mut seen = HashSet::with_capacity(n);
        for s in &subject_ids {
            if !seen.insert(s.as_str()) {
                return Err(Error::DuplicateId(s.clone()));
            }
        }
        let all = outcome.iter().chain(&exposure).chain(covariates.iter().flatten());
        if all.clone().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput("phenotype values must be finite".into()));
        }
        Ok(PhenotypeTable {
            subject_ids,
            outcome,
            exposure,
            covariate_names,
            covariates,
            dropped_missing: 0,
        })
    }

    pub fn n(&self) -> usize {
        self.subject_ids.len()
    }

    pub fn index(&self) -> HashMap<&str, usize> {
        self.subject_ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect()
    }

    /// Keep the listed rows, in the given order.
    pub fn select(&self, rows: &[usize]) -> PhenotypeTable {
        PhenotypeTable {
            subject_ids: rows.iter().map(|&i| self.subject_ids[i].clone()).collect(),
            outcome: rows.iter().map(|&i| self.outcome[i]).collect(),
            exposure: rows.iter().map(|&i| self.exposure[i]).collect(),
            covariate_names: self.covariate_names.clone(),
            covariates: self
                .covariates
                .iter()
                .map(|c| rows.iter().map(|&i| c[i]).collect())
                .collect(),
            dropped_missing: self.dropped_missing,
        }
    }

    pub fn distinct_exposures(&self) -> usize {
        let mut v: Vec<u64> = self.exposure.iter().map(|x| x.to_bits()).collect();
        v.sort_unstable();
        v.dedup();
        v.len()
    }
}

fn is_missing(s: &str) -> bool {
    s.is_empty() || s == "NA"
}

/// Read a tab-separated phenotype table with a header row, selecting columns
/// by name. Rows with a missing outcome or exposure are dropped with a warning;
/// a missing covariate is an error.
pub fn read_phenotype(path: &Path, columns: &PhenotypeColumns) -> Result<PhenotypeTable> {
    let mut lines = open_lines(path)?;
    let header = match lines.next() {
        Some(h) => h?.1,
        None => return Err(parse_error(path, 1, "empty file")),
    };
    let names: Vec<&str> = header.split('\t').map(str::trim).collect();
    let find = |name: &str| {
        names.iter().position(|c| *c == name).ok_or_else(|| Error::MissingColumn {
            path: path.to_path_buf(),
            column: name.to_string(),
        })
    };
    let si = find(&columns.subject)?;
    let yi = find(&columns.outcome)?;
    let xi = find(&columns.exposure)?;
    let zi = columns.covariates.iter().map(|c| find(c)).collect::<Result<Vec<_>>>()?;

    let mut subjects = Vec::new();
    let mut y = Vec::new();
    let mut x = Vec::new();
    let mut z = vec![Vec::new(); zi.len()];
    let mut dropped = 0;
    for item in lines {
        let (no, line) = item?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').map(str::trim).collect();
        if f.len() != names.len() {
            return Err(parse_error(path, no, format!("expected {} fields, found {}", names.len(), f.len())));
        }
        if is_missing(f[yi]) || is_missing(f[xi]) {
            dropped += 1;
            continue;
        }
        let num = |col: usize| -> Result<f64> {
            if is_missing(f[col]) {
                return Err(Error::MissingValue {
                    path: path.to_path_buf(),
                    line: no,
                    column: names[col].to_string(),
                });
            }
            let v: f64 = f[col]
                .parse()
                .map_err(|_| parse_error(path, no, format!("column `{}`: cannot parse `{}`", names[col], f[col])))?;
            if !v.is_finite() {
                return Err(parse_error(path, no, format!("column `{}` is not finite", names[col])));
            }
            Ok(v)
        };
        subjects.push(f[si].to_string());
        y.push(num(yi)?);
        x.push(num(xi)?);
        for (k, &c) in zi.iter().enumerate() {
            z[k].push(num(c)?);
        }
    }
    if dropped > 0 {
        warn!("{}: dropped {dropped} rows with missing outcome or exposure", path.display());
    }
    let mut table = PhenotypeTable::new(subjects, y, x, columns.covariates.clone(), z)?;
    table.dropped_missing = dropped;
    Ok(table)
}
