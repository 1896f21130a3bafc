use serde::Serialize;
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// A fitted coefficient with its standard error and two-sided normal-reference
/// Wald p-value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientEstimate {
    pub term: String,
    pub estimate: f64,
    pub std_error: f64,
    pub p_value: f64,
}

impl CoefficientEstimate {
    pub fn new(term: impl Into<String>, estimate: f64, std_error: f64) -> Result<Self> {
        let p_value = wald_p(estimate, std_error)?;
        Ok(CoefficientEstimate {
            term: term.into(),
            estimate,
            std_error,
            p_value,
        })
    }

    /// |estimate| / std_error, with the same degenerate conventions as the p-value.
    pub fn abs_z(&self) -> f64 {
        abs_z(self.estimate, self.std_error)
    }
}

fn abs_z(estimate: f64, std_error: f64) -> f64 {
    if std_error > 0.0 {
        estimate.abs() / std_error
    } else if estimate != 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

/// Two-sided p-value 2·(1 − Φ(|estimate|/std_error)).
///
/// A zero standard error gives 0 for a nonzero estimate and 1 when the
/// estimate is also zero. Evaluated as erfc(|z|/√2) so the upper tail keeps
/// full relative precision.
pub fn wald_p(estimate: f64, std_error: f64) -> Result<f64> {
    if !estimate.is_finite() || !std_error.is_finite() {
        return Err(Error::NonFiniteInput(format!(
            "wald test on estimate {estimate}, std_error {std_error}"
        )));
    }
    if std_error < 0.0 {
        return Err(Error::NonFiniteInput(format!("negative standard error {std_error}")));
    }
    let z = abs_z(estimate, std_error);
    if z.is_infinite() {
        return Ok(0.0);
    }
    Ok(erfc(z / std::f64::consts::SQRT_2).clamp(0.0, 1.0))
}
