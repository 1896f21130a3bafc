//! Least-squares machinery shared by every pipeline step: OLS with classical
//! (or sandwich) standard errors, normal-reference Wald p-values, and a
//! cross-validated coordinate-descent lasso.

mod design;
mod lasso;
mod ols;
mod wald;

pub use design::{DesignMatrix, INTERCEPT};
pub use lasso::{assign_folds, fit_lasso, fit_lasso_at, lambda_max, LassoConfig, LassoFit};
pub use ols::{fit_ols, Covariance, OlsFit, OlsSolver, RANK_TOL};
pub use wald::{wald_p, CoefficientEstimate};
