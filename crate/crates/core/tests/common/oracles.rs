//! Independent reference computations shared by the oracle tests and the
//! acceptance suite. Each returns the worst discrepancy it saw.

use std::collections::BTreeSet;

use quasimed::pipeline::bh_adjust;
use quasimed::regression::{fit_lasso, fit_ols, wald_p, DesignMatrix, LassoConfig};
use rand::Rng;

use super::{bh_oracle, invert, mat_vec, normal, normal_equations, phi_cdf, random_design, rng};

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

/// Worst relative error of QR-based OLS estimates and standard errors against
/// normal-equation solutions over `instances` random problems.
pub fn ols_worst_error(instances: usize) -> f64 {
    let mut r = rng(11);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let n = r.random_range(15..120);
        let p = r.random_range(1..8.min(n - 5));
        let d = random_design(&mut r, n, p);
        let y: Vec<f64> = (0..n).map(|i| d.get(i, p - 1) * 2.0 - 1.0 + normal(&mut r)).collect();
        let fit = fit_ols(&d, &y).unwrap();
        let (xtx, xty) = normal_equations(&d, &y);
        let inv = invert(&xtx);
        let beta = mat_vec(&inv, &xty);
        let rss: f64 = (0..n)
            .map(|i| {
                let f: f64 = (0..p).map(|j| d.get(i, j) * beta[j]).sum();
                (y[i] - f).powi(2)
            })
            .sum();
        let sigma2 = rss / (n - p) as f64;
        for j in 0..p {
            let c = &fit.coefficients[j];
            worst = worst.max(rel_err(c.estimate, beta[j]));
            worst = worst.max(rel_err(c.std_error, (sigma2 * inv[j][j]).sqrt()));
        }
    }
    worst
}

/// Standardized KKT residual of a lasso fit at its chosen λ: zero gradient on
/// unpenalized columns, gradient equal to λ·sign on active penalized columns
/// and at most λ on inactive ones (gradients divided by column sd).
pub fn kkt_violation(d: &DesignMatrix, y: &[f64], penalized: &BTreeSet<String>, config: &LassoConfig) -> f64 {
    let fit = fit_lasso(d, y, penalized, config).unwrap();
    let n = d.n_rows();
    let lambda = fit.chosen_lambda;
    let mut resid = y.to_vec();
    for (j, name) in d.names().iter().enumerate() {
        let b = fit.coefficient(name);
        for (r, x) in resid.iter_mut().zip(d.column(j)) {
            *r -= b * x;
        }
    }
    let mut worst: f64 = 0.0;
    for (j, name) in d.names().iter().enumerate() {
        let col = d.column(j);
        let g: f64 = col.iter().zip(&resid).map(|(x, r)| x * r).sum::<f64>() / n as f64;
        if !penalized.contains(name) {
            worst = worst.max(g.abs());
            continue;
        }
        let mean = col.iter().sum::<f64>() / n as f64;
        let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        let g = g / sd;
        let b = fit.coefficient(name);
        let v = if b != 0.0 {
            (g - lambda * b.signum()).abs()
        } else {
            (g.abs() - lambda).max(0.0)
        };
        worst = worst.max(v);
    }
    worst
}

/// Worst KKT residual over `instances` random sparse regressions, including
/// wide designs with more penalized columns than rows.
pub fn lasso_worst_kkt(instances: usize) -> f64 {
    let mut r = rng(23);
    let mut worst: f64 = 0.0;
    for t in 0..instances {
        let n = r.random_range(40..120);
        let p = r.random_range(5..150);
        let d = random_design(&mut r, n, p + 1);
        let mut y = vec![0.0; n];
        for j in 1..=p.min(4) {
            let b = r.random_range(0.5..2.0);
            for (yi, x) in y.iter_mut().zip(d.column(j)) {
                *yi += b * x;
            }
        }
        for yi in &mut y {
            *yi += 3.0 + normal(&mut r);
        }
        // x1 stays unpenalized alongside the intercept.
        let penalized: BTreeSet<String> = (2..=p).map(|j| format!("x{j}")).collect();
        let config = LassoConfig {
            seed: t as u64,
            ..LassoConfig::default()
        };
        worst = worst.max(kkt_violation(&d, &y, &penalized, &config));
    }
    worst
}

/// Number of random p-vectors on which `bh_adjust` differs in any bit from
/// the definition. Half of the vectors draw from a coarse grid to force ties.
pub fn bh_mismatches(vectors: usize) -> usize {
    let mut r = rng(31);
    let mut bad = 0;
    for v in 0..vectors {
        let m = r.random_range(1..120);
        let p: Vec<f64> = (0..m)
            .map(|_| {
                if v % 2 == 0 {
                    r.random::<f64>()
                } else {
                    r.random_range(0..20) as f64 / 19.0
                }
            })
            .collect();
        let got = bh_adjust(&p).unwrap();
        let want = bh_oracle(&p);
        if got.iter().zip(&want).any(|(a, b)| a.to_bits() != b.to_bits()) {
            bad += 1;
        }
    }
    bad
}

/// Worst absolute error of `wald_p` against 2(1 − Φ(|z|)) with Φ from
/// quadrature, over z in [−8, 8].
pub fn wald_worst_error() -> f64 {
    let mut worst: f64 = 0.0;
    for k in 0..=320 {
        let z = -8.0 + k as f64 * 0.05;
        let want = 2.0 * (1.0 - phi_cdf(z.abs()));
        let got = wald_p(z * 0.7, 0.7).unwrap();
        worst = worst.max((got - want).abs());
    }
    worst
}
