use crate::error::{Error, Result};

fn check_unit(what: &'static str, value: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::OutOfRange { what, value });
    }
    Ok(())
}

/// Joint-significance test: the larger of the two component p-values.
pub fn js_test(p_outcome: f64, p_exposure: f64) -> Result<f64> {
    check_unit("p_outcome", p_outcome)?;
    check_unit("p_exposure", p_exposure)?;
    Ok(p_outcome.max(p_exposure))
}

/// Benjamini-Hochberg step-up adjusted p-values, returned in input order.
///
/// With p₍₁₎ ≤ … ≤ p₍ₘ₎ (stable order for ties), q₍ᵢ₎ = min over j ≥ i of
/// m·p₍ⱼ₎/j, capped at 1.
pub fn bh_adjust(p_values: &[f64]) -> Result<Vec<f64>> {
    for &p in p_values {
        check_unit("p_value", p)?;
    }
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]));
    let mut q = vec![0.0; m];
    let mut running = f64::INFINITY;
    for (pos, &i) in order.iter().enumerate().rev() {
        let rank = pos + 1;
        let candidate = m as f64 * p_values[i] / rank as f64;
        running = running.min(candidate);
        q[i] = running.min(1.0);
    }
    Ok(q)
}
