//! Threshold trading with and without an extra information source.
//!
//! At a decision time `t` a trader buys one unit of a bond paying `D_T`,
//! financed at the riskless rate, if its valuation exceeds `K P_tT`. The
//! market trader values the bond at the market price `S_t`; the informed
//! trader uses `S̃_t = P_tT E[D_T | ξ_t, ξ'_t]` but pays `S_t` like anyone else.

use rayon::prelude::*;

use crate::error::{domain_err, Result};
use crate::filtering::{posterior_multi_signal, price_single_dividend, ObservationSet};
use crate::market::{DiscountCurve, FactorPrior};
use crate::stochastic::{lanes, mean_and_stderr, std_normal_sample, substream, InfoProcessSpec};

#[derive(Debug, Clone)]
pub struct StatArbConfig {
    pub prior: FactorPrior,
    /// Rate of the public information process.
    pub sigma: f64,
    /// Rate of the informed trader's extra process.
    pub sigma_informed: f64,
    /// Correlation of the two bridge noises.
    pub rho: f64,
    pub horizon: f64,
    pub decision_time: f64,
    pub threshold: f64,
    pub curve: DiscountCurve,
    pub n_trials: usize,
    pub seed: u64,
}

impl StatArbConfig {
    /// The digital-bond experiment: `D_T ∈ {0, 1}` with default probability
    /// 0.2, `T = 5`, `σ = 0.25`, `σ' = 0.45`, `ρ = 0.15`, `K = 0.7`, 2000
    /// trials, zero rates, decision at `T/2`.
    pub fn digital_preset(seed: u64) -> Self {
        Self {
            prior: FactorPrior::binary(0.0, 1.0, 0.8).expect("valid preset"),
            sigma: 0.25,
            sigma_informed: 0.45,
            rho: 0.15,
            horizon: 5.0,
            decision_time: 2.5,
            threshold: 0.7,
            curve: DiscountCurve::zero(),
            n_trials: 2000,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.decision_time > 0.0 && self.decision_time < self.horizon) {
            return domain_err(format!(
                "decision time must lie in (0, {}), got {}",
                self.horizon, self.decision_time
            ));
        }
        if self.n_trials < 2 {
            return domain_err("need at least two trials");
        }
        if !(-1.0..=1.0).contains(&self.rho) {
            return domain_err(format!("correlation must lie in [-1, 1], got {}", self.rho));
        }
        if !self.threshold.is_finite() {
            return domain_err("threshold must be finite");
        }
        Ok(())
    }
}

/// One simulated decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StatArbTrial {
    pub payoff: f64,
    pub market_price: f64,
    pub informed_price: f64,
    /// `V_T` of the market trader.
    pub market_value: f64,
    /// `Ṽ_T` of the informed trader.
    pub informed_value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StatArbReport {
    pub trials: Vec<StatArbTrial>,
    pub mean_market: f64,
    pub stderr_market: f64,
    pub mean_informed: f64,
    pub stderr_informed: f64,
    /// `mean_informed − mean_market`.
    pub mean_excess: f64,
    /// Standard error of the paired differences `Ṽ_T − V_T`.
    pub stderr_excess: f64,
    /// Mean and standard error of `E[ΔV_T | G_t]` over the same trials.
    pub mean_conditional_excess: f64,
    pub stderr_conditional_excess: f64,
    pub market_buy_rate: f64,
    pub informed_buy_rate: f64,
}

/// `E[ΔV_T | G_t] = P_tT⁻¹ (1{S̃ > KP} − 1{S > KP}) (S̃ − S)`.
///
/// Nonnegative: the indicator difference and `S̃ − S` never have opposite
/// signs. A price exactly at `KP` does not buy.
pub fn conditional_excess_value(market: f64, informed: f64, threshold: f64, discount: f64) -> f64 {
    let level = threshold * discount;
    let buys = |s: f64| if s > level { 1.0 } else { 0.0 };
    (buys(informed) - buys(market)) * (informed - market) / discount
}

/// Runs the experiment; deterministic given the seed.
pub fn run_stat_arb(config: &StatArbConfig) -> Result<StatArbReport> {
    config.validate()?;
    let t = config.decision_time;
    let public = InfoProcessSpec::new(config.sigma, config.horizon)?;
    let extra = InfoProcessSpec::new(config.sigma_informed, config.horizon)?;
    let discount = config.curve.discount(t, config.horizon)?;
    let sd = public.bridge_variance(t).sqrt();
    let rho = config.rho;
    let rho_c = (1.0 - rho * rho).sqrt();
    let level = config.threshold * discount;

    let trials: Result<Vec<StatArbTrial>> = (0..config.n_trials as u64)
        .into_par_iter()
        .map(|k| {
            let d = config.prior.sample(&mut substream(config.seed, lanes::FACTOR, k));
            let z1 = std_normal_sample(&mut substream(config.seed, lanes::BRIDGE, k));
            let z2 = std_normal_sample(&mut substream(config.seed, lanes::BRIDGE_PARTNER, k));
            let beta = sd * z1;
            let beta_extra = sd * (rho * z1 + rho_c * z2);
            let xi = config.sigma * t * d + beta;
            let xi_extra = config.sigma_informed * t * d + beta_extra;

            let market_price = price_single_dividend(&config.prior, &public, &config.curve, t, xi)?;
            let set = ObservationSet::pair(public, extra, rho)?
                .with(0, t, xi)?
                .with(1, t, xi_extra)?;
            let informed_price = discount * posterior_multi_signal(&config.prior, &set)?.mean()?;

            let excess = d - market_price / discount;
            let market_value = if market_price > level { excess } else { 0.0 };
            let informed_value = if informed_price > level { excess } else { 0.0 };
            Ok(StatArbTrial {
                payoff: d,
                market_price,
                informed_price,
                market_value,
                informed_value,
            })
        })
        .collect();
    let trials = trials?;

    let column = |f: &dyn Fn(&StatArbTrial) -> f64| -> Vec<f64> { trials.iter().map(f).collect() };
    let (mean_market, stderr_market) = mean_and_stderr(&column(&|r| r.market_value));
    let (mean_informed, stderr_informed) = mean_and_stderr(&column(&|r| r.informed_value));
    let (_, stderr_excess) = mean_and_stderr(&column(&|r| r.informed_value - r.market_value));
    let (mean_conditional_excess, stderr_conditional_excess) = mean_and_stderr(&column(&|r| {
        conditional_excess_value(r.market_price, r.informed_price, config.threshold, discount)
    }));
    let n = trials.len() as f64;
    let market_buy_rate = trials.iter().filter(|r| r.market_price > level).count() as f64 / n;
    let informed_buy_rate = trials.iter().filter(|r| r.informed_price > level).count() as f64 / n;
    Ok(StatArbReport {
        mean_market,
        stderr_market,
        mean_informed,
        stderr_informed,
        mean_excess: mean_informed - mean_market,
        stderr_excess,
        mean_conditional_excess,
        stderr_conditional_excess,
        market_buy_rate,
        informed_buy_rate,
        trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn excess_value_cases() {
        assert_eq!(conditional_excess_value(0.5, 0.9, 0.7, 1.0), 0.9 - 0.5);
        assert_eq!(conditional_excess_value(0.9, 0.5, 0.7, 1.0), 0.9 - 0.5);
        assert_eq!(conditional_excess_value(0.8, 0.9, 0.7, 1.0), 0.0);
        assert_eq!(conditional_excess_value(0.1, 0.6, 0.7, 1.0), 0.0);
        assert_eq!(conditional_excess_value(0.6, 0.6, 0.7, 1.0), 0.0);
        // A price exactly at the level does not buy.
        assert_eq!(conditional_excess_value(0.7, 0.9, 0.7, 1.0), 0.9 - 0.7);
    }

    #[test]
    fn same_seed_same_report() {
        let mut cfg = StatArbConfig::digital_preset(9);
        cfg.n_trials = 300;
        let a = run_stat_arb(&cfg).unwrap();
        let b = run_stat_arb(&cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = StatArbConfig::digital_preset(1);
        cfg.decision_time = 5.0;
        assert!(run_stat_arb(&cfg).is_err());
        let mut cfg = StatArbConfig::digital_preset(1);
        cfg.rho = 1.5;
        assert!(run_stat_arb(&cfg).is_err());
    }
}
