//! Coordinate-descent lasso with cross-validated penalty selection.
//!
//! Unpenalized columns are profiled out by projecting the response and every
//! penalized column onto the orthogonal complement of their span. Penalized
//! columns are scaled to unit variance and the projected response to unit
//! root-mean-square before descent; the reported λ and coefficients are on the
//! original scale.

use std::collections::{BTreeMap, BTreeSet};

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::design::{DesignMatrix, INTERCEPT};
use super::ols::OlsSolver;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LassoConfig {
    pub n_lambda: usize,
    pub lambda_min_ratio: f64,
    pub folds: usize,
    pub seed: u64,
    /// Descent stops once no standardized coefficient moves by more than this.
    pub tolerance: f64,
    pub max_sweeps: usize,
    /// Stop descending the path once the training fit explains this fraction
    /// of the projected response variance.
    pub saturation: f64,
}

impl Default for LassoConfig {
    fn default() -> Self {
        LassoConfig {
            n_lambda: 100,
            lambda_min_ratio: 1e-3,
            folds: 10,
            seed: 0,
            tolerance: 1e-7,
            max_sweeps: 10_000,
            saturation: 0.999,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoFit {
    pub lambda_grid: Vec<f64>,
    pub chosen_lambda: f64,
    pub chosen_index: usize,
    /// Cross-validated mean squared error per grid point; NaN where the path
    /// stopped early or no cross-validation was run.
    pub cv_mse: Vec<f64>,
    /// Unpenalized terms always, penalized terms only when nonzero.
    pub coefficients: BTreeMap<String, f64>,
    pub selected_terms: BTreeSet<String>,
}

impl LassoFit {
    pub fn coefficient(&self, term: &str) -> f64 {
        self.coefficients.get(term).copied().unwrap_or(0.0)
    }
}

/// Penalized columns after scaling and projection, for one set of rows.
struct Standardized {
    n: usize,
    /// Design column index of each retained penalized column.
    pen: Vec<usize>,
    scale: Vec<f64>,
    x: Vec<f64>,
    col_sq: Vec<f64>,
    y: Vec<f64>,
    y_scale: f64,
    unpen: Option<OlsSolver>,
}

impl Standardized {
    fn new(design: &DesignMatrix, response: &[f64], pen_idx: &[usize], unpen_idx: &[usize]) -> Result<Self> {
        let n = design.n_rows();
        let unpen = if unpen_idx.is_empty() {
            None
        } else {
            Some(OlsSolver::new(&design.select_columns(unpen_idx))?)
        };
        let project = |v: &mut [f64]| -> Result<()> {
            if let Some(solver) = &unpen {
                let coef = solver.solve(v)?;
                let fitted = solver.design().predict(&coef);
                for (a, f) in v.iter_mut().zip(fitted) {
                    *a -= f;
                }
            }
            Ok(())
        };

        let mut y = response.to_vec();
        project(&mut y)?;
        let y_ms = y.iter().map(|v| v * v).sum::<f64>() / n as f64;
        let y_scale = y_ms.sqrt();
        if y_scale > 0.0 {
            y.iter_mut().for_each(|v| *v /= y_scale);
        }

        let mut pen = Vec::with_capacity(pen_idx.len());
        let mut scale = Vec::with_capacity(pen_idx.len());
        let mut x = Vec::with_capacity(pen_idx.len() * n);
        let mut col_sq = Vec::with_capacity(pen_idx.len());
        let mut buf = vec![0.0; n];
        for &j in pen_idx {
            let col = design.column(j);
            let mean = col.iter().sum::<f64>() / n as f64;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            if var <= 0.0 {
                continue;
            }
            let sd = var.sqrt();
            for (b, v) in buf.iter_mut().zip(col) {
                *b = v / sd;
            }
            project(&mut buf)?;
            let sq = buf.iter().map(|v| v * v).sum::<f64>() / n as f64;
            if sq <= 1e-12 {
                continue;
            }
            pen.push(j);
            scale.push(sd);
            x.extend_from_slice(&buf);
            col_sq.push(sq);
        }

        Ok(Standardized {
            n,
            pen,
            scale,
            x,
            col_sq,
            y,
            y_scale,
            unpen,
        })
    }

    fn col(&self, k: usize) -> &[f64] {
        &self.x[k * self.n..(k + 1) * self.n]
    }

    fn lambda_max(&self) -> f64 {
        (0..self.pen.len())
            .map(|k| dot(self.col(k), &self.y).abs() / self.n as f64)
            .fold(0.0, f64::max)
            * self.y_scale
    }

    /// Original-scale penalized coefficients from standardized ones.
    fn to_original(&self, b: &[(usize, f64)]) -> Vec<(usize, f64)> {
        b.iter()
            .map(|&(k, v)| (self.pen[k], v * self.y_scale / self.scale[k]))
            .collect()
    }
}

// Four independent accumulators let the compiler vectorize the loop.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for l in 0..4 {
            acc[l] += x[l] * y[l];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

fn soft_threshold(z: f64, lambda: f64) -> f64 {
    if z > lambda {
        z - lambda
    } else if z < -lambda {
        z + lambda
    } else {
        0.0
    }
}

/// The path also stops once a λ step adds less than this fraction of the
/// variance explained so far.
const FDEV: f64 = 1e-5;

struct Descent<'a> {
    s: &'a Standardized,
    b: Vec<f64>,
    r: Vec<f64>,
    grad: Vec<f64>,
    tol: f64,
    max_sweeps: usize,
}

impl<'a> Descent<'a> {
    fn new(s: &'a Standardized, tol: f64, max_sweeps: usize) -> Self {
        let p = s.pen.len();
        let r = s.y.clone();
        let grad = (0..p).map(|k| dot(s.col(k), &r) / s.n as f64).collect();
        Descent {
            s,
            b: vec![0.0; p],
            r,
            grad,
            tol,
            max_sweeps,
        }
    }

    fn update(&mut self, k: usize, lambda: f64) -> f64 {
        let s = self.s;
        let xk = s.col(k);
        let g = dot(xk, &self.r) / s.n as f64;
        let old = self.b[k];
        let new = soft_threshold(g + s.col_sq[k] * old, lambda) / s.col_sq[k];
        if new != old {
            let d = new - old;
            for (ri, xi) in self.r.iter_mut().zip(xk) {
                *ri -= d * xi;
            }
            self.b[k] = new;
        }
        (new - old).abs()
    }

    fn sweep(&mut self, set: &[usize], lambda: f64) -> f64 {
        let mut max_delta: f64 = 0.0;
        for &k in set {
            max_delta = max_delta.max(self.update(k, lambda));
        }
        max_delta
    }

    /// Minimize at `lambda` (standardized scale), warm-started, screening with
    /// the sequential strong rule and confirming with a full gradient pass.
    fn solve(&mut self, lambda: f64, lambda_prev: f64) {
        let p = self.s.pen.len();
        let threshold = 2.0 * lambda - lambda_prev;
        let mut in_strong: Vec<bool> = (0..p)
            .map(|k| self.b[k] != 0.0 || self.grad[k].abs() >= threshold)
            .collect();
        let mut sweeps = 0usize;
        loop {
            let strong: Vec<usize> = (0..p).filter(|&k| in_strong[k]).collect();
            loop {
                let delta = self.sweep(&strong, lambda);
                sweeps += 1;
                if delta < self.tol || sweeps >= self.max_sweeps {
                    break;
                }
                let active: Vec<usize> = strong.iter().copied().filter(|&k| self.b[k] != 0.0).collect();
                loop {
                    let delta = self.sweep(&active, lambda);
                    sweeps += 1;
                    if delta < self.tol || sweeps >= self.max_sweeps {
                        break;
                    }
                }
            }
            let s = self.s;
            for k in 0..p {
                self.grad[k] = dot(s.col(k), &self.r) / s.n as f64;
            }
            let mut violated = false;
            for k in 0..p {
                if !in_strong[k] && self.grad[k].abs() > lambda {
                    in_strong[k] = true;
                    violated = true;
                }
            }
            if sweeps >= self.max_sweeps {
                warn!("lasso descent hit {} sweeps at lambda {lambda:.3e}", self.max_sweeps);
                break;
            }
            if !violated {
                break;
            }
        }
    }

    fn explained(&self) -> f64 {
        let rss = dot(&self.r, &self.r) / self.s.n as f64;
        1.0 - rss
    }

    fn sparse(&self) -> Vec<(usize, f64)> {
        self.b
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(k, v)| (k, *v))
            .collect()
    }
}

/// Standardized coefficient path over an original-scale λ sequence. Entries
/// after an early stop are `None`.
fn run_path(s: &Standardized, grid: &[f64], config: &LassoConfig, early_stop: bool) -> Vec<Option<Vec<(usize, f64)>>> {
    let mut out = Vec::with_capacity(grid.len());
    if s.y_scale == 0.0 || s.pen.is_empty() {
        out.extend(grid.iter().map(|_| Some(Vec::new())));
        return out;
    }
    let mut descent = Descent::new(s, config.tolerance, config.max_sweeps);
    let mut prev = f64::INFINITY;
    let mut prev_explained = f64::NAN;
    let mut stopped = false;
    for &lambda in grid {
        if stopped {
            out.push(None);
            continue;
        }
        let lam = lambda / s.y_scale;
        descent.solve(lam, if prev.is_finite() { prev } else { lam });
        prev = lam;
        out.push(Some(descent.sparse()));
        let explained = descent.explained();
        let stalled = explained > 0.0 && explained - prev_explained < FDEV * explained;
        if early_stop && (explained >= config.saturation || stalled) {
            stopped = true;
        }
        prev_explained = explained;
    }
    out
}

struct Split {
    pen_idx: Vec<usize>,
    unpen_idx: Vec<usize>,
}

fn split_terms(design: &DesignMatrix, penalized: &BTreeSet<String>) -> Result<Split> {
    if penalized.is_empty() {
        return Err(Error::EmptyPenaltySet);
    }
    let names = design.name_set();
    if let Some(bad) = penalized.iter().find(|t| !names.contains(t.as_str())) {
        return Err(Error::UnknownTerm(bad.clone()));
    }
    if penalized.contains(INTERCEPT) {
        return Err(Error::ConfigInvalid("the intercept cannot be penalized".into()));
    }
    let (pen_idx, unpen_idx) = (0..design.n_cols()).partition(|&j| penalized.contains(&design.names()[j]));
    Ok(Split { pen_idx, unpen_idx })
}

/// Unpenalized coefficients given fixed original-scale penalized ones.
fn profile_unpenalized(
    design: &DesignMatrix,
    response: &[f64],
    s: &Standardized,
    unpen_idx: &[usize],
    beta: &[(usize, f64)],
) -> Result<Vec<(usize, f64)>> {
    let Some(solver) = &s.unpen else {
        return Ok(Vec::new());
    };
    let mut partial = response.to_vec();
    for &(j, b) in beta {
        for (p, x) in partial.iter_mut().zip(design.column(j)) {
            *p -= b * x;
        }
    }
    let a = solver.solve(&partial)?;
    Ok(unpen_idx.iter().copied().zip(a).collect())
}

fn assemble(
    design: &DesignMatrix,
    response: &[f64],
    s: &Standardized,
    split: &Split,
    b: &[(usize, f64)],
) -> Result<(BTreeMap<String, f64>, BTreeSet<String>)> {
    let beta = s.to_original(b);
    let unpen = profile_unpenalized(design, response, s, &split.unpen_idx, &beta)?;
    let mut coefficients = BTreeMap::new();
    let mut selected = BTreeSet::new();
    for (j, v) in unpen {
        coefficients.insert(design.names()[j].clone(), v);
    }
    for (j, v) in beta {
        coefficients.insert(design.names()[j].clone(), v);
        selected.insert(design.names()[j].clone());
    }
    Ok((coefficients, selected))
}

fn log_grid(lambda_max: f64, n: usize, ratio: f64) -> Vec<f64> {
    if n == 1 {
        return vec![lambda_max];
    }
    let lo = (lambda_max * ratio).ln();
    let hi = lambda_max.ln();
    (0..n)
        .map(|i| (hi + (lo - hi) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Lasso with λ chosen by k-fold cross-validated mean squared error over a
/// log-spaced grid from λ_max down to λ_max·`lambda_min_ratio`.
pub fn fit_lasso(
    design: &DesignMatrix,
    response: &[f64],
    penalized: &BTreeSet<String>,
    config: &LassoConfig,
) -> Result<LassoFit> {
    let n = design.n_rows();
    if response.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "response has {} rows, design has {n}",
            response.len()
        )));
    }
    if config.n_lambda == 0 || config.folds < 2 {
        return Err(Error::ConfigInvalid("lasso needs at least one λ and two folds".into()));
    }
    let split = split_terms(design, penalized)?;
    let folds = assign_folds(n, config.folds, config.seed);
    let required = split.unpen_idx.len() + 1;
    for (f, rows) in folds.iter().enumerate() {
        let train = n - rows.len();
        if rows.is_empty() || train < required {
            return Err(Error::FoldTooSmall {
                fold: f,
                rows: if rows.is_empty() { 0 } else { train },
                required,
            });
        }
    }

    let full = Standardized::new(design, response, &split.pen_idx, &split.unpen_idx)?;
    let lambda_max = full.lambda_max();
    if lambda_max == 0.0 {
        let (coefficients, selected_terms) = assemble(design, response, &full, &split, &[])?;
        return Ok(LassoFit {
            lambda_grid: vec![0.0],
            chosen_lambda: 0.0,
            chosen_index: 0,
            cv_mse: vec![f64::NAN],
            coefficients,
            selected_terms,
        });
    }
    let grid = log_grid(lambda_max, config.n_lambda, config.lambda_min_ratio);

    // Task 0 is the full-data path, tasks 1..=k are the folds.
    let tasks: Vec<Option<&Vec<usize>>> = std::iter::once(None).chain(folds.iter().map(Some)).collect();
    let results: Vec<Result<PathOutcome>> = tasks
        .par_iter()
        .map(|task| match task {
            None => Ok(PathOutcome::Full(run_path(&full, &grid, config, true))),
            Some(holdout) => fold_errors(design, response, &split, holdout, &grid, config).map(PathOutcome::Fold),
        })
        .collect();

    let mut full_path = Vec::new();
    let mut sse = vec![0.0; grid.len()];
    let mut reached = vec![true; grid.len()];
    for r in results {
        match r? {
            PathOutcome::Full(p) => full_path = p,
            PathOutcome::Fold(errs) => {
                for (i, e) in errs.into_iter().enumerate() {
                    match e {
                        Some(v) => sse[i] += v,
                        None => reached[i] = false,
                    }
                }
            }
        }
    }
    for (i, p) in full_path.iter().enumerate() {
        if p.is_none() {
            reached[i] = false;
        }
    }
    let cv_mse: Vec<f64> = sse
        .iter()
        .zip(&reached)
        .map(|(s, &ok)| if ok { s / n as f64 } else { f64::NAN })
        .collect();
    let mut chosen_index = 0;
    for i in 0..grid.len() {
        if reached[i] && cv_mse[i] < cv_mse[chosen_index] {
            chosen_index = i;
        }
    }
    let b = full_path[chosen_index].as_ref().expect("λ_max is always reached");
    let (coefficients, selected_terms) = assemble(design, response, &full, &split, b)?;
    Ok(LassoFit {
        chosen_lambda: grid[chosen_index],
        lambda_grid: grid,
        chosen_index,
        cv_mse,
        coefficients,
        selected_terms,
    })
}

enum PathOutcome {
    Full(Vec<Option<Vec<(usize, f64)>>>),
    Fold(Vec<Option<f64>>),
}

fn fold_errors(
    design: &DesignMatrix,
    response: &[f64],
    split: &Split,
    holdout: &[usize],
    grid: &[f64],
    config: &LassoConfig,
) -> Result<Vec<Option<f64>>> {
    let n = design.n_rows();
    let mut is_test = vec![false; n];
    for &i in holdout {
        is_test[i] = true;
    }
    let train: Vec<usize> = (0..n).filter(|&i| !is_test[i]).collect();
    let train_design = design.select_rows(&train);
    let train_y: Vec<f64> = train.iter().map(|&i| response[i]).collect();
    let s = Standardized::new(&train_design, &train_y, &split.pen_idx, &split.unpen_idx)?;
    let path = run_path(&s, grid, config, true);
    path.into_iter()
        .map(|b| {
            let Some(b) = b else { return Ok(None) };
            let beta = s.to_original(&b);
            let unpen = profile_unpenalized(&train_design, &train_y, &s, &split.unpen_idx, &beta)?;
            let mut err = 0.0;
            for &i in holdout {
                let mut pred = 0.0;
                for &(j, v) in unpen.iter().chain(beta.iter()) {
                    pred += v * design.get(i, j);
                }
                err += (response[i] - pred).powi(2);
            }
            Ok(Some(err))
        })
        .collect()
}

/// Deterministic fold membership: a seeded shuffle dealt round-robin.
pub fn assign_folds(n: usize, k: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut folds = vec![Vec::new(); k];
    for (pos, i) in order.into_iter().enumerate() {
        folds[pos % k].push(i);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    folds
}

/// Lasso at a single fixed λ (original scale), no cross-validation.
pub fn fit_lasso_at(
    design: &DesignMatrix,
    response: &[f64],
    penalized: &BTreeSet<String>,
    lambda: f64,
    config: &LassoConfig,
) -> Result<LassoFit> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::ConfigInvalid(format!("lambda must be finite and nonnegative, got {lambda}")));
    }
    let split = split_terms(design, penalized)?;
    let s = Standardized::new(design, response, &split.pen_idx, &split.unpen_idx)?;
    let lambda_max = s.lambda_max();
    // Warm-start from λ_max so small penalties converge along a path.
    let mut grid: Vec<f64> = if lambda < lambda_max {
        log_grid(lambda_max, config.n_lambda.max(2), config.lambda_min_ratio)
            .into_iter()
            .take_while(|&l| l > lambda)
            .collect()
    } else {
        Vec::new()
    };
    grid.push(lambda);
    let path = run_path(&s, &grid, config, false);
    let b = path.last().and_then(|p| p.as_ref()).expect("fixed-λ path runs to the end");
    let (coefficients, selected_terms) = assemble(design, response, &s, &split, b)?;
    Ok(LassoFit {
        lambda_grid: vec![lambda],
        chosen_lambda: lambda,
        chosen_index: 0,
        cv_mse: vec![f64::NAN],
        coefficients,
        selected_terms,
    })
}

/// λ_max for the given design: the smallest penalty that zeroes every
/// penalized coefficient.
pub fn lambda_max(design: &DesignMatrix, response: &[f64], penalized: &BTreeSet<String>) -> Result<f64> {
    let split = split_terms(design, penalized)?;
    Ok(Standardized::new(design, response, &split.pen_idx, &split.unpen_idx)?.lambda_max())
}
