use serde::Serialize;

use super::design::DesignMatrix;
use super::wald::CoefficientEstimate;
use crate::error::{Error, Result};

/// A column whose component orthogonal to the preceding columns is smaller
/// than this fraction of its norm is treated as collinear.
pub const RANK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Covariance {
    /// σ̂²(XᵀX)⁻¹ with σ̂² = RSS/(n − p).
    #[default]
    Classical,
    /// HC0 heteroskedasticity-consistent sandwich.
    Sandwich,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    pub coefficients: Vec<CoefficientEstimate>,
    pub residual_variance: f64,
    pub n_obs: usize,
    pub n_params: usize,
    pub fitted: Vec<f64>,
    pub residuals: Vec<f64>,
}

impl OlsFit {
    pub fn coefficient(&self, term: &str) -> Option<&CoefficientEstimate> {
        self.coefficients.iter().find(|c| c.term == term)
    }

    pub fn estimates(&self) -> Vec<f64> {
        self.coefficients.iter().map(|c| c.estimate).collect()
    }
}

/// Householder QR factorization of a design, reusable across responses.
#[derive(Debug, Clone)]
pub struct OlsSolver {
    design: DesignMatrix,
    /// Householder vectors below (and on) the diagonal, R strictly above it.
    qr: Vec<f64>,
    r_diag: Vec<f64>,
    v_norm2: Vec<f64>,
    /// R⁻¹, row-major p × p upper triangular.
    r_inv: Vec<f64>,
    covariance: Covariance,
}

impl OlsSolver {
    pub fn new(design: &DesignMatrix) -> Result<Self> {
        Self::with_covariance(design, Covariance::Classical)
    }

    pub fn with_covariance(design: &DesignMatrix, covariance: Covariance) -> Result<Self> {
        let n = design.n_rows();
        let p = design.n_cols();
        if p == 0 {
            return Err(Error::DimensionMismatch("design has no columns".into()));
        }
        if n <= p {
            return Err(Error::DimensionMismatch(format!(
                "{n} observations for {p} parameters; need n > p"
            )));
        }
        let mut qr: Vec<f64> = (0..p).flat_map(|j| design.column(j).iter().copied()).collect();
        let col_norms: Vec<f64> = (0..p)
            .map(|j| design.column(j).iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect();
        let mut r_diag = vec![0.0; p];
        let mut v_norm2 = vec![0.0; p];

        for k in 0..p {
            let (head, tail) = qr.split_at_mut((k + 1) * n);
            let col = &mut head[k * n + k..(k + 1) * n];
            let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
            if col_norms[k] == 0.0 || norm <= RANK_TOL * col_norms[k] {
                return Err(Error::RankDeficient {
                    column: design.names()[k].clone(),
                    index: k,
                });
            }
            let alpha = if col[0] >= 0.0 { -norm } else { norm };
            col[0] -= alpha;
            let vn2: f64 = col.iter().map(|v| v * v).sum();
            r_diag[k] = alpha;
            v_norm2[k] = vn2;
            for j in (k + 1)..p {
                let other = &mut tail[(j - k - 1) * n + k..(j - k) * n];
                let s: f64 = col.iter().zip(other.iter()).map(|(a, b)| a * b).sum();
                let f = 2.0 * s / vn2;
                for (o, v) in other.iter_mut().zip(col.iter()) {
                    *o -= f * v;
                }
            }
        }

        let mut solver = OlsSolver {
            design: design.clone(),
            qr,
            r_diag,
            v_norm2,
            r_inv: Vec::new(),
            covariance,
        };
        solver.r_inv = solver.invert_r();
        Ok(solver)
    }

    fn r(&self, i: usize, j: usize) -> f64 {
        if i == j {
            self.r_diag[i]
        } else {
            self.qr[j * self.design.n_rows() + i]
        }
    }

    fn invert_r(&self) -> Vec<f64> {
        let p = self.design.n_cols();
        let mut inv = vec![0.0; p * p];
        for col in 0..p {
            for i in (0..=col).rev() {
                let mut s = if i == col { 1.0 } else { 0.0 };
                for k in (i + 1)..=col {
                    s -= self.r(i, k) * inv[k * p + col];
                }
                inv[i * p + col] = s / self.r_diag[i];
            }
        }
        inv
    }

    pub fn design(&self) -> &DesignMatrix {
        &self.design
    }

    fn apply_qt(&self, y: &mut [f64]) {
        let n = self.design.n_rows();
        for k in 0..self.design.n_cols() {
            let v = &self.qr[k * n + k..(k + 1) * n];
            let seg = &mut y[k..];
            let s: f64 = v.iter().zip(seg.iter()).map(|(a, b)| a * b).sum();
            let f = 2.0 * s / self.v_norm2[k];
            for (o, vi) in seg.iter_mut().zip(v) {
                *o -= f * vi;
            }
        }
    }

    /// Least-squares coefficients only.
    pub fn solve(&self, response: &[f64]) -> Result<Vec<f64>> {
        let n = self.design.n_rows();
        let p = self.design.n_cols();
        if response.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "response has {} rows, design has {n}",
                response.len()
            )));
        }
        if let Some(i) = response.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput(format!("response row {i} is {}", response[i])));
        }
        let mut qty = response.to_vec();
        self.apply_qt(&mut qty);
        let mut beta = vec![0.0; p];
        for i in (0..p).rev() {
            let mut s = qty[i];
            for k in (i + 1)..p {
                s -= self.r(i, k) * beta[k];
            }
            beta[i] = s / self.r_diag[i];
        }
        Ok(beta)
    }

    pub fn fit(&self, response: &[f64]) -> Result<OlsFit> {
        let n = self.design.n_rows();
        let p = self.design.n_cols();
        let beta = self.solve(response)?;
        let fitted = self.design.predict(&beta);
        let residuals: Vec<f64> = response.iter().zip(&fitted).map(|(y, f)| y - f).collect();
        let rss: f64 = residuals.iter().map(|r| r * r).sum();
        let sigma2 = rss / (n - p) as f64;

        let variances: Vec<f64> = match self.covariance {
            Covariance::Classical => (0..p)
                .map(|j| sigma2 * self.r_inv[j * p..(j + 1) * p].iter().map(|v| v * v).sum::<f64>())
                .collect(),
            Covariance::Sandwich => self.sandwich_variances(&residuals),
        };

        let coefficients = self
            .design
            .names()
            .iter()
            .zip(beta.iter().zip(&variances))
            .map(|(name, (&b, &v))| CoefficientEstimate::new(name.clone(), b, v.max(0.0).sqrt()))
            .collect::<Result<Vec<_>>>()?;

        Ok(OlsFit {
            coefficients,
            residual_variance: sigma2,
            n_obs: n,
            n_params: p,
            fitted,
            residuals,
        })
    }

    fn sandwich_variances(&self, residuals: &[f64]) -> Vec<f64> {
        let n = self.design.n_rows();
        let p = self.design.n_cols();
        // Q1 = X R⁻¹, so cov = R⁻¹ (Q1ᵀ diag(e²) Q1) R⁻ᵀ.
        let mut q1 = vec![0.0; n * p];
        for a in 0..p {
            let out = &mut q1[a * n..(a + 1) * n];
            for k in 0..=a {
                let c = self.r_inv[k * p + a];
                if c != 0.0 {
                    for (o, x) in out.iter_mut().zip(self.design.column(k)) {
                        *o += c * x;
                    }
                }
            }
        }
        let mut meat = vec![0.0; p * p];
        for a in 0..p {
            for b in a..p {
                let s: f64 = (0..n)
                    .map(|i| q1[a * n + i] * q1[b * n + i] * residuals[i] * residuals[i])
                    .sum();
                meat[a * p + b] = s;
                meat[b * p + a] = s;
            }
        }
        (0..p)
            .map(|j| {
                let row = &self.r_inv[j * p..(j + 1) * p];
                let mut v = 0.0;
                for a in 0..p {
                    for b in 0..p {
                        v += row[a] * meat[a * p + b] * row[b];
                    }
                }
                v
            })
            .collect()
    }
}

/// Ordinary least squares with classical standard errors and Wald p-values.
pub fn fit_ols(design: &DesignMatrix, response: &[f64]) -> Result<OlsFit> {
    OlsSolver::new(design)?.fit(response)
}
