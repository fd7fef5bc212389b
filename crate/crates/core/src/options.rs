//! European options on a single-dividend asset whose price is driven by one
//! information process.
//!
//! Changing measure with `Φ_t⁻¹`, where `Φ_t = E_prior[exp(a X − b X²/2)]`,
//! makes `ξ_t` a Brownian bridge with variance `t(T−t)/T`. Since `S_t` is
//! increasing in `ξ_t`, exercise happens above a single critical level `ξ*`
//! and the price reduces to one integral over the prior:
//!
//! ```text
//! C_0 = P_0t ∫ p(x) (P_tT x − K) N((σxt − ξ*)/√v) dx,   v = t(T−t)/T
//! ```

use rand::Rng;
use rayon::prelude::*;

use crate::error::{domain_err, Error, Result};
use crate::filtering::{posterior_single, Evidence, PosteriorState};
use crate::market::{DiscountCurve, FactorPrior};
use crate::numerics::{find_root_monotone, graded_breaks, integrate_with_breaks, std_normal_cdf, Interval};
use crate::stochastic::{lanes, mean_and_stderr, std_normal_sample, substream, InfoProcessSpec};

/// Largest number of bracket doublings when searching for `ξ*`.
const MAX_WIDENINGS: usize = 200;

/// A European option on `S_t = P_tT E_t[X]`, expiring at `t < T`.
#[derive(Debug, Clone)]
pub struct CallSpec {
    strike: f64,
    maturity: f64,
    prior: FactorPrior,
    spec: InfoProcessSpec,
    curve: DiscountCurve,
}

impl CallSpec {
    pub fn new(
        strike: f64,
        maturity: f64,
        prior: FactorPrior,
        spec: InfoProcessSpec,
        curve: DiscountCurve,
    ) -> Result<Self> {
        if !(strike >= 0.0 && strike.is_finite()) {
            return domain_err(format!("strike must be finite and ≥ 0, got {strike}"));
        }
        if !(maturity > 0.0 && maturity < spec.horizon()) {
            return domain_err(format!(
                "option maturity must lie in (0, {}), got {maturity}",
                spec.horizon()
            ));
        }
        Ok(Self {
            strike,
            maturity,
            prior,
            spec,
            curve,
        })
    }

    pub fn strike(&self) -> f64 {
        self.strike
    }

    pub fn maturity(&self) -> f64 {
        self.maturity
    }

    pub fn horizon(&self) -> f64 {
        self.spec.horizon()
    }

    pub fn prior(&self) -> &FactorPrior {
        &self.prior
    }

    pub fn info_spec(&self) -> &InfoProcessSpec {
        &self.spec
    }

    pub fn curve(&self) -> &DiscountCurve {
        &self.curve
    }

    pub fn with_strike(&self, strike: f64) -> Result<Self> {
        Self::new(strike, self.maturity, self.prior.clone(), self.spec, self.curve.clone())
    }

    /// Law of `ξ_t` under the bridge measure.
    pub fn bridge_law(&self) -> BridgeMeasureLaw {
        BridgeMeasureLaw::new(&self.spec, self.maturity)
    }

    /// `S_t` as a function of `ξ_t`.
    pub fn underlying_price(&self, xi: f64) -> Result<f64> {
        let post = posterior_single(&self.prior, &self.spec, self.maturity, xi)?;
        Ok(self.forward_discount()? * post.mean()?)
    }

    /// `P_0T E_prior[X]`.
    pub fn spot(&self) -> f64 {
        self.curve.initial(self.horizon()) * self.prior.mean()
    }

    fn forward_discount(&self) -> Result<f64> {
        self.curve.discount(self.maturity, self.horizon())
    }
}

/// `ξ_t ~ N(0, t(T−t)/T)` under the bridge measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BridgeMeasureLaw {
    variance: f64,
}

impl BridgeMeasureLaw {
    pub fn new(spec: &InfoProcessSpec, t: f64) -> Self {
        Self {
            variance: spec.bridge_variance(t),
        }
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.variance.sqrt() * std_normal_sample(rng)
    }
}

/// Where the call is exercised, as a function of `ξ_t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CriticalLevel {
    /// Exercised exactly when `ξ_t > ξ*`.
    Level(f64),
    /// The strike is at or below every attainable price.
    AlwaysExercised,
    /// The strike is at or above every attainable price.
    NeverExercised,
}

/// How an option value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExerciseRegime {
    Interior,
    /// Analytic limit for a strike below the attainable price range.
    AlwaysExercised,
    /// Analytic limit for a strike above the attainable price range.
    NeverExercised,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptionValue {
    pub price: f64,
    pub regime: ExerciseRegime,
}

/// The level `ξ*` with `S_t(ξ*) = K`.
pub fn critical_information(call: &CallSpec) -> Result<CriticalLevel> {
    let p = call.forward_discount()?;
    let (lo, hi) = call.prior.range();
    let k = call.strike;
    if k <= p * lo {
        return Ok(CriticalLevel::AlwaysExercised);
    }
    if k >= p * hi {
        return Ok(CriticalLevel::NeverExercised);
    }
    let t = call.maturity;
    let sigma = call.spec.sigma();
    if sigma == 0.0 {
        // The price never moves off the forward.
        return Ok(if p * call.prior.mean() > k {
            CriticalLevel::AlwaysExercised
        } else {
            CriticalLevel::NeverExercised
        });
    }

    let g = |xi: f64| call.underlying_price(xi).map(|s| s - k);
    let center = sigma * t * call.prior.mean();
    let mut width = call.bridge_law().variance().sqrt() + sigma * t * call.prior.variance().sqrt();
    let (mut a, mut b) = (center - width, center + width);
    let mut widenings = 0;
    loop {
        let (ga, gb) = (g(a)?, g(b)?);
        if ga < 0.0 && gb > 0.0 {
            break;
        }
        if ga == 0.0 {
            return Ok(CriticalLevel::Level(a));
        }
        if gb == 0.0 {
            return Ok(CriticalLevel::Level(b));
        }
        widenings += 1;
        if widenings > MAX_WIDENINGS {
            return Err(Error::Bracketing {
                lo: a,
                hi: b,
                g_lo: ga,
                g_hi: gb,
            });
        }
        width *= 2.0;
        if ga >= 0.0 {
            a = center - width;
        }
        if gb <= 0.0 {
            b = center + width;
        }
    }
    let failure = std::cell::Cell::new(None);
    let root = find_root_monotone(
        |xi| match g(xi) {
            Ok(v) => v,
            Err(e) => {
                failure.set(Some(e));
                f64::NAN
            }
        },
        Interval::new(a, b)?,
        1e-15 * (b - a),
    );
    if let Some(e) = failure.take() {
        return Err(e);
    }
    Ok(CriticalLevel::Level(root?))
}

/// Exercise probability under the forward measure of outcome `x`:
/// `P(N(σxt, v) > ξ*)`.
fn exercise_probability(sigma: f64, t: f64, variance: f64, x: f64, xi_star: f64) -> f64 {
    std_normal_cdf((sigma * x * t - xi_star) / variance.sqrt())
}

/// `E_prior[f(X)]` where `f` may have a sharp feature near `x_feature`.
fn prior_expectation<F: Fn(f64) -> f64>(
    prior: &FactorPrior,
    f: F,
    x_feature: f64,
    feature_scale: f64,
    tol: f64,
) -> Result<f64> {
    if let Some((outcomes, probs)) = prior.atoms() {
        return Ok(outcomes.iter().zip(probs).map(|(&d, &p)| p * f(d)).sum());
    }
    let at_prior = PosteriorState::from_evidence(prior, 0.0, Evidence::NONE)?;
    let (support, prior_breaks) = at_prior.quadrature_layout().expect("continuous prior");
    let mut breaks = prior_breaks.to_vec();
    if x_feature.is_finite() && feature_scale > 0.0 {
        breaks.extend(graded_breaks(x_feature, feature_scale, support));
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    integrate_with_breaks(|x| prior.density(x) * f(x), support, &breaks, tol)
}

/// `S_0 − P_0t K`, the value of a surely exercised call.
fn forward_value(call: &CallSpec) -> f64 {
    call.spot() - call.curve.initial(call.maturity) * call.strike
}

/// Call value from the single bridge-measure integral, to absolute
/// tolerance `tol` for continuous priors.
pub fn call_price_semianalytic(call: &CallSpec, tol: f64) -> Result<OptionValue> {
    semianalytic(call, tol, true)
}

/// Put value `P_0t E[(K − S_t)^+]` by the same reduction.
pub fn put_price_semianalytic(call: &CallSpec, tol: f64) -> Result<OptionValue> {
    semianalytic(call, tol, false)
}

fn semianalytic(call: &CallSpec, tol: f64, is_call: bool) -> Result<OptionValue> {
    let p0t = call.curve.initial(call.maturity);
    let forward = forward_value(call);
    let (in_money, out_money) = if is_call { (forward, 0.0) } else { (0.0, -forward) };
    let xi_star = match critical_information(call)? {
        CriticalLevel::AlwaysExercised => {
            return Ok(OptionValue {
                price: in_money,
                regime: ExerciseRegime::AlwaysExercised,
            })
        }
        CriticalLevel::NeverExercised => {
            return Ok(OptionValue {
                price: out_money,
                regime: ExerciseRegime::NeverExercised,
            })
        }
        CriticalLevel::Level(x) => x,
    };
    let p = call.forward_discount()?;
    let k = call.strike;
    let sigma = call.spec.sigma();
    let t = call.maturity;
    let v = call.bridge_law().variance();
    let integrand = |x: f64| {
        let up = exercise_probability(sigma, t, v, x, xi_star);
        if is_call {
            (p * x - k) * up
        } else {
            (k - p * x) * (1.0 - up)
        }
    };
    let x_star = xi_star / (sigma * t);
    let e = prior_expectation(&call.prior, integrand, x_star, v.sqrt() / (sigma * t), tol / p0t)?;
    Ok(OptionValue {
        price: p0t * e,
        regime: ExerciseRegime::Interior,
    })
}

/// A call on a bond paying `d1` with probability `p1` and `d0 < d1`
/// otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinaryCall {
    pub p1: f64,
    pub d0: f64,
    pub d1: f64,
    pub sigma: f64,
    pub maturity: f64,
    pub horizon: f64,
    pub strike: f64,
}

impl BinaryCall {
    fn validate(&self) -> Result<()> {
        if !(self.p1 >= 0.0 && self.p1 <= 1.0) {
            return domain_err(format!("p1 must lie in [0, 1], got {}", self.p1));
        }
        if !(self.d0 < self.d1) {
            return domain_err(format!("need d0 < d1, got {} and {}", self.d0, self.d1));
        }
        if !(self.sigma >= 0.0 && self.maturity > 0.0 && self.maturity < self.horizon) {
            return domain_err("need σ ≥ 0 and 0 < t < T");
        }
        Ok(())
    }

    /// `τ = tT/(T−t)`.
    pub fn tau(&self) -> f64 {
        self.maturity * self.horizon / (self.horizon - self.maturity)
    }

    /// `(u⁺, u⁻)` for an interior strike.
    pub fn u_plus_minus(&self, curve: &DiscountCurve) -> Result<(f64, f64)> {
        self.validate()?;
        let p = curve.discount(self.maturity, self.horizon)?;
        let (up, down) = (p * self.d1 - self.strike, self.strike - p * self.d0);
        if !(up > 0.0 && down > 0.0) {
            return domain_err("strike outside the attainable price range");
        }
        let spread = self.sigma * (self.d1 - self.d0) * self.tau().sqrt();
        let ln_ratio = (self.p1 * up).ln() - ((1.0 - self.p1) * down).ln();
        Ok((
            (ln_ratio + 0.5 * spread * spread) / spread,
            (ln_ratio - 0.5 * spread * spread) / spread,
        ))
    }

    /// The same option as a [`CallSpec`].
    pub fn to_call_spec(&self, curve: &DiscountCurve) -> Result<CallSpec> {
        self.validate()?;
        CallSpec::new(
            self.strike,
            self.maturity,
            FactorPrior::binary(self.d0, self.d1, self.p1)?,
            InfoProcessSpec::new(self.sigma, self.horizon)?,
            curve.clone(),
        )
    }

    fn degenerate(&self, p: f64) -> Option<ExerciseRegime> {
        if self.strike <= p * self.d0 {
            Some(ExerciseRegime::AlwaysExercised)
        } else if self.strike >= p * self.d1 {
            Some(ExerciseRegime::NeverExercised)
        } else if self.p1 == 0.0 || self.p1 == 1.0 || self.sigma == 0.0 {
            let forward = p * (self.d0 + self.p1 * (self.d1 - self.d0));
            Some(if forward > self.strike {
                ExerciseRegime::AlwaysExercised
            } else {
                ExerciseRegime::NeverExercised
            })
        } else {
            None
        }
    }
}

/// Closed-form call value on a two-point bond.
pub fn binary_call_price(option: &BinaryCall, curve: &DiscountCurve) -> Result<OptionValue> {
    option.validate()?;
    let p0t = curve.initial(option.maturity);
    let p = curve.discount(option.maturity, option.horizon)?;
    let (p1, p0) = (option.p1, 1.0 - option.p1);
    let k = option.strike;
    match option.degenerate(p) {
        Some(ExerciseRegime::AlwaysExercised) => Ok(OptionValue {
            price: p0t * (p * (p0 * option.d0 + p1 * option.d1) - k),
            regime: ExerciseRegime::AlwaysExercised,
        }),
        Some(_) => Ok(OptionValue {
            price: 0.0,
            regime: ExerciseRegime::NeverExercised,
        }),
        None => {
            let (u_plus, u_minus) = option.u_plus_minus(curve)?;
            let price = p0t
                * (p1 * (p * option.d1 - k) * std_normal_cdf(u_plus)
                    - p0 * (k - p * option.d0) * std_normal_cdf(u_minus));
            Ok(OptionValue {
                price,
                regime: ExerciseRegime::Interior,
            })
        }
    }
}

/// `∂C_0/∂S_0` of a two-point bond call, where `S_0` moves through
/// `p1 = (S_0/P_0T − d0)/(d1 − d0)`.
pub fn binary_delta(option: &BinaryCall, curve: &DiscountCurve) -> Result<f64> {
    option.validate()?;
    let p = curve.discount(option.maturity, option.horizon)?;
    match option.degenerate(p) {
        Some(ExerciseRegime::AlwaysExercised) => Ok(1.0),
        Some(_) => Ok(0.0),
        None => {
            let (u_plus, u_minus) = option.u_plus_minus(curve)?;
            let k = option.strike;
            Ok(
                ((p * option.d1 - k) * std_normal_cdf(u_plus) + (k - p * option.d0) * std_normal_cdf(u_minus))
                    / (p * (option.d1 - option.d0)),
            )
        }
    }
}

/// `Φ_t = E_prior[exp(a X − b X²/2)]` at `ξ_t = xi`.
pub fn density_process(prior: &FactorPrior, spec: &InfoProcessSpec, t: f64, xi: f64) -> Result<f64> {
    Ok(posterior_single(prior, spec, t, xi)?.ln_marginal_likelihood().exp())
}

/// Monte Carlo estimate and standard error of a European option, sampling
/// `(X, β_t)` under the pricing measure.
pub fn mc_option_price(call: &CallSpec, is_call: bool, n_paths: usize, seed: u64) -> Result<(f64, f64)> {
    if n_paths < 2 {
        return domain_err("Monte Carlo needs at least two paths");
    }
    let p0t = call.curve.initial(call.maturity);
    let sigma = call.spec.sigma();
    let t = call.maturity;
    let law = call.bridge_law();
    let payoffs: Result<Vec<f64>> = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let x = call.prior.sample(&mut substream(seed, lanes::FACTOR, i));
            let beta = law.sample(&mut substream(seed, lanes::BRIDGE, i));
            let s = call.underlying_price(sigma * t * x + beta)?;
            let intrinsic = if is_call { s - call.strike } else { call.strike - s };
            Ok(p0t * intrinsic.max(0.0))
        })
        .collect();
    Ok(mean_and_stderr(&payoffs?))
}

/// Monte Carlo estimate and standard error of a call under the bridge
/// measure: `ξ_t` is drawn from its bridge law and the payoff is weighted
/// by `Φ_t`.
pub fn mc_call_price_bridge(call: &CallSpec, n_paths: usize, seed: u64) -> Result<(f64, f64)> {
    if n_paths < 2 {
        return domain_err("Monte Carlo needs at least two paths");
    }
    let p0t = call.curve.initial(call.maturity);
    let p = call.forward_discount()?;
    let t = call.maturity;
    let law = call.bridge_law();
    let payoffs: Result<Vec<f64>> = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let xi = law.sample(&mut substream(seed, lanes::BRIDGE, i));
            let post = posterior_single(&call.prior, &call.spec, t, xi)?;
            let phi = post.ln_marginal_likelihood().exp();
            let s = p * post.mean()?;
            Ok(p0t * phi * (s - call.strike).max(0.0))
        })
        .collect();
    Ok(mean_and_stderr(&payoffs?))
}
