use crate::error::{domain_err, Result};

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Standard normal distribution function, rejecting non-finite input.
pub fn normal_cdf(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return domain_err(format!("normal_cdf needs a finite argument, got {x}"));
    }
    Ok(std_normal_cdf(x))
}

/// Standard normal distribution function without argument checks.
///
/// Computed as `erfc(-x/√2)/2`, which keeps full relative accuracy in the
/// lower tail. Infinite arguments map to 0 or 1; NaN propagates.
#[inline]
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
}

#[inline]
pub fn normal_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Log density of `N(mean, variance)` at `x`.
#[inline]
pub fn ln_normal_pdf(x: f64, mean: f64, variance: f64) -> f64 {
    let z = x - mean;
    -LN_SQRT_2PI - 0.5 * variance.ln() - 0.5 * z * z / variance
}

/// The point `z > 0` with `Φ(-z) = tail`, for `0 < tail < 0.5`.
///
/// Used to cut Gaussian tails at a prescribed probability mass.
pub fn std_normal_quantile_tail(tail: f64) -> Result<f64> {
    if !(tail > 0.0 && tail < 0.5) {
        return domain_err(format!("tail mass must lie in (0, 0.5), got {tail}"));
    }
    let bracket = super::Interval::new(0.0, 37.0)?;
    // ln Φ(-z) is smooth and strictly decreasing, which suits the root finder
    // far out in the tail where Φ(-z) itself underflows toward zero.
    let target = tail.ln();
    super::find_root_monotone(|z| std_normal_cdf(-z).ln() - target, bracket, 1e-14)
}
