use crate::error::{domain_err, Error, Result};

/// Normalizes log weights to probabilities.
///
/// The maximum is subtracted before exponentiation, so inputs of any
/// magnitude work. Entries of `-inf` get probability zero.
pub fn normalize_log_weights(logw: &[f64]) -> Result<Vec<f64>> {
    if logw.iter().any(|w| w.is_nan() || *w == f64::INFINITY) {
        return domain_err("log weights must not be NaN or +inf");
    }
    let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::DegenerateWeights);
    }
    let mut out: Vec<f64> = logw.iter().map(|&w| (w - max).exp()).collect();
    let total: f64 = out.iter().sum();
    for p in &mut out {
        *p /= total;
    }
    Ok(out)
}

/// `ln Σ exp(x_i)`, or `-inf` for an empty or all-`-inf` input.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max.is_nan() {
        return max;
    }
    max + xs.iter().map(|&x| (x - max).exp()).sum::<f64>().ln()
}
