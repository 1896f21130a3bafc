#![allow(dead_code)]

pub mod oracles;

use std::path::PathBuf;

use quasimed::ingest::{GeneSummaries, PhenotypeTable};
use quasimed::regression::DesignMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Intercept plus `p - 1` standard-normal columns named `x1..`.
pub fn random_design(rng: &mut ChaCha8Rng, n: usize, p: usize) -> DesignMatrix {
    let mut d = DesignMatrix::new(n);
    d.push_intercept().unwrap();
    for j in 1..p {
        let col: Vec<f64> = (0..n).map(|_| normal(rng)).collect();
        d.push_column(format!("x{j}"), &col).unwrap();
    }
    d
}

/// Dense (XᵀX, Xᵀy) for the normal-equation oracles.
pub fn normal_equations(d: &DesignMatrix, y: &[f64]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let p = d.n_cols();
    let mut xtx = vec![vec![0.0; p]; p];
    let mut xty = vec![0.0; p];
    for a in 0..p {
        for b in 0..p {
            xtx[a][b] = d.column(a).iter().zip(d.column(b)).map(|(u, v)| u * v).sum();
        }
        xty[a] = d.column(a).iter().zip(y).map(|(u, v)| u * v).sum();
    }
    (xtx, xty)
}

/// Gauss-Jordan inverse with partial pivoting.
pub fn invert(m: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let p = m.len();
    let mut a: Vec<Vec<f64>> = m
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..p).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..p {
        let pivot = (col..p)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        let d = a[col][col];
        for v in a[col].iter_mut() {
            *v /= d;
        }
        for row in 0..p {
            if row != col {
                let f = a[row][col];
                if f != 0.0 {
                    let pivot_row = a[col].clone();
                    for (v, pv) in a[row].iter_mut().zip(pivot_row) {
                        *v -= f * pv;
                    }
                }
            }
        }
    }
    a.into_iter().map(|r| r[p..].to_vec()).collect()
}

pub fn mat_vec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter().map(|r| r.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

/// Standard-normal CDF by composite Simpson quadrature of the density.
pub fn phi_cdf(z: f64) -> f64 {
    let a = z.abs();
    let steps = 40_000;
    let h = a / steps as f64;
    let f = |t: f64| (-t * t / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut s = f(0.0) + f(a);
    for k in 1..steps {
        let t = k as f64 * h;
        s += if k % 2 == 1 { 4.0 * f(t) } else { 2.0 * f(t) };
    }
    let half = s * h / 3.0;
    if z >= 0.0 {
        0.5 + half
    } else {
        0.5 - half
    }
}

/// Step-up adjusted p-values computed straight from the definition, with
/// ranks from a stable ordering.
pub fn bh_oracle(p: &[f64]) -> Vec<f64> {
    let m = p.len();
    let rank: Vec<usize> = (0..m)
        .map(|i| 1 + (0..m).filter(|&k| p[k] < p[i] || (p[k] == p[i] && k < i)).count())
        .collect();
    (0..m)
        .map(|i| {
            (0..m)
                .filter(|&k| rank[k] >= rank[i])
                .map(|k| (m as f64 * p[k] / rank[k] as f64).min(1.0))
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

/// Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let en = (na * nb / (na + nb)).sqrt();
    let lambda = (en + 0.12 + 0.11 / en) * d;
    let mut p = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        p += 2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp();
    }
    (d, p.clamp(0.0, 1.0))
}

/// Hand-built summaries where every subject has `cells` cells; `expressed`
/// and `means` are gene-major.
pub fn summaries(genes: &[&str], expressed: Vec<Vec<u32>>, means: Vec<Vec<f64>>, cells: u32) -> GeneSummaries {
    let n = expressed[0].len();
    let subjects: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();
    GeneSummaries::from_parts(
        genes.iter().map(|g| g.to_string()).collect(),
        subjects,
        vec![cells; n],
        expressed.into_iter().zip(means).collect(),
        Default::default(),
    )
    .unwrap()
}

pub fn phenotype(outcome: Vec<f64>, exposure: Vec<f64>) -> PhenotypeTable {
    let n = outcome.len();
    PhenotypeTable::new((0..n).map(|i| format!("s{i}")).collect(), outcome, exposure, vec![], vec![]).unwrap()
}
