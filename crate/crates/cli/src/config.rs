//! JSON configuration for every subcommand, plus the built-in presets.
//!
//! Each subcommand reads one object. Unknown fields are rejected so that a
//! misspelt key is a schema error rather than a silently ignored default.

use infoprice::market::{self, AssetSpec, CashFlow, CashFlowSpec, ContinuousFamily, DiscountCurve, FactorPrior};
use infoprice::stochastic::InfoProcessSpec;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub const PRESETS: [&str; 2] = ["fig2", "fig3"];

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PriorConfig {
    Discrete { outcomes: Vec<f64>, probs: Vec<f64> },
    Digital { p1: f64 },
    Binary { d0: f64, d1: f64, p1: f64 },
    Normal { mean: f64, sd: f64 },
    Lognormal { mu: f64, s: f64 },
    Uniform { lo: f64, hi: f64 },
    Exponential { rate: f64 },
}

impl PriorConfig {
    pub fn build(&self) -> infoprice::Result<FactorPrior> {
        match self {
            Self::Discrete { outcomes, probs } => FactorPrior::discrete(outcomes.clone(), probs.clone()),
            Self::Digital { p1 } => FactorPrior::digital(*p1),
            Self::Binary { d0, d1, p1 } => FactorPrior::binary(*d0, *d1, *p1),
            Self::Normal { mean, sd } => FactorPrior::normal(*mean, *sd),
            Self::Lognormal { mu, s } => FactorPrior::lognormal(*mu, *s),
            Self::Uniform { lo, hi } => FactorPrior::continuous(ContinuousFamily::Uniform { lo: *lo, hi: *hi }),
            Self::Exponential { rate } => FactorPrior::continuous(ContinuousFamily::Exponential { rate: *rate }),
        }
    }

    /// Outcomes and up-probability when the prior has exactly two atoms.
    pub fn as_binary(&self) -> Option<(f64, f64, f64)> {
        match self {
            Self::Digital { p1 } => Some((0.0, 1.0, *p1)),
            Self::Binary { d0, d1, p1 } => Some((*d0, *d1, *p1)),
            Self::Discrete { outcomes, probs } if outcomes.len() == 2 => {
                let (lo, hi) = if outcomes[0] < outcomes[1] { (0, 1) } else { (1, 0) };
                Some((outcomes[lo], outcomes[hi], probs[hi]))
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CurveConfig {
    #[default]
    Zero,
    Flat {
        rate: f64,
    },
    /// `(t, P_0t)` nodes.
    Table {
        nodes: Vec<(f64, f64)>,
    },
}

impl CurveConfig {
    pub fn build(&self) -> infoprice::Result<DiscountCurve> {
        match self {
            Self::Zero => Ok(DiscountCurve::zero()),
            Self::Flat { rate } => DiscountCurve::flat(*rate),
            Self::Table { nodes } => DiscountCurve::table(nodes),
        }
    }
}

/// `coef · Π x[f]` over the listed factor indices.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Term {
    pub coef: f64,
    #[serde(default)]
    pub factors: Vec<usize>,
}

/// One payment date with its own factor.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Payment {
    pub date: f64,
    pub prior: PriorConfig,
    pub sigma: f64,
    pub terms: Vec<Term>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AssetConfig {
    /// A single payment `D_T = X_T`.
    Single {
        prior: PriorConfig,
        sigma: f64,
        maturity: f64,
    },
    TwoCouponBond {
        c: f64,
        n: f64,
        p1: f64,
        p2: f64,
        sigmas: (f64, f64),
        t1: f64,
        t2: f64,
    },
    RecoveryBond {
        c: f64,
        n: f64,
        r1: f64,
        r2: f64,
        p1: f64,
        p2: f64,
        sigmas: (f64, f64),
        t1: f64,
        t2: f64,
    },
    /// Polynomial cash flows; payment `k` may use factors `0..=k`.
    CashFlows { payments: Vec<Payment> },
}

impl AssetConfig {
    pub fn build(&self) -> infoprice::Result<AssetSpec> {
        match self {
            Self::Single { prior, sigma, maturity } => AssetSpec::new(
                CashFlowSpec::new(vec![*maturity], vec![CashFlow::latest(1.0)])?,
                vec![prior.build()?],
                vec![InfoProcessSpec::new(*sigma, *maturity)?],
            ),
            Self::TwoCouponBond {
                c,
                n,
                p1,
                p2,
                sigmas,
                t1,
                t2,
            } => market::two_coupon_bond(*c, *n, *p1, *p2, *sigmas, *t1, *t2),
            Self::RecoveryBond {
                c,
                n,
                r1,
                r2,
                p1,
                p2,
                sigmas,
                t1,
                t2,
            } => market::recovery_bond(*c, *n, *r1, *r2, *p1, *p2, *sigmas, *t1, *t2),
            Self::CashFlows { payments } => {
                let mut dates = Vec::new();
                let mut flows = Vec::new();
                let mut priors = Vec::new();
                let mut info = Vec::new();
                for (k, p) in payments.iter().enumerate() {
                    if let Some(bad) = p.terms.iter().flat_map(|t| &t.factors).find(|&&f| f > k) {
                        return Err(infoprice::Error::Domain(format!(
                            "payment {k} refers to factor {bad}, which is unknown at its date"
                        )));
                    }
                    let terms = p.terms.clone();
                    flows.push(CashFlow::new(move |x| {
                        terms
                            .iter()
                            .map(|t| t.coef * t.factors.iter().map(|&f| x[f]).product::<f64>())
                            .sum()
                    }));
                    dates.push(p.date);
                    priors.push(p.prior.build()?);
                    info.push(InfoProcessSpec::new(p.sigma, p.date)?);
                }
                AssetSpec::new(CashFlowSpec::new(dates, flows)?, priors, info)
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PriceConfig {
    pub asset: AssetConfig,
    #[serde(default)]
    pub curve: CurveConfig,
    /// Valuation times.
    pub times: Vec<f64>,
    /// Each entry is one `ξ` vector (one value per factor); every entry is
    /// priced at every time.
    pub xi: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub asset: AssetConfig,
    #[serde(default)]
    pub curve: CurveConfig,
    /// Uniform steps up to the last payment date; payment dates are added.
    pub steps: usize,
    pub paths: usize,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OptionConfig {
    pub prior: PriorConfig,
    pub sigma: f64,
    pub horizon: f64,
    pub maturity: f64,
    #[serde(default)]
    pub curve: CurveConfig,
    pub strikes: Vec<f64>,
    /// Monte Carlo paths under the bridge measure; 0 skips the check.
    pub paths: usize,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MutualInfoConfig {
    pub prior: PriorConfig,
    pub sigma: f64,
    pub sigma_informed: f64,
    pub rho: f64,
    pub horizon: f64,
    pub times: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct StatArbConfigFile {
    pub prior: PriorConfig,
    pub sigma: f64,
    pub sigma_informed: f64,
    pub rho: f64,
    pub horizon: f64,
    pub threshold: f64,
    #[serde(default)]
    pub curve: CurveConfig,
    /// Decision times, one output row each.
    pub times: Vec<f64>,
    pub trials: usize,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MarketSimConfig {
    pub prior: PriorConfig,
    #[serde(default)]
    pub curve: CurveConfig,
    /// One information rate per trader.
    pub sigmas: Vec<f64>,
    pub horizon: f64,
    pub steps: usize,
    /// Symmetric half-width `δ`: quotes `(1 − δ)S` and `(1 + δ)S`.
    pub spread: f64,
    #[serde(default)]
    pub seed: Option<u64>,
}

/// A configuration problem, reported with the JSON path when there is one.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

pub fn parse<T: DeserializeOwned>(text: &str) -> Result<T, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        ConfigError(format!("config error at `{path}`: {}", e.into_inner()))
    })
}

fn unknown_preset(name: &str) -> ConfigError {
    ConfigError(format!(
        "unknown preset `{name}`; available presets: {}",
        PRESETS.join(", ")
    ))
}

fn check_preset(name: &str) -> Result<bool, ConfigError> {
    match name {
        "fig2" => Ok(false),
        "fig3" => Ok(true),
        other => Err(unknown_preset(other)),
    }
}

// Shared parameters: D ∈ {0, 1} with P(D = 0) = 0.2, T = 5, σ = 0.25,
// σ' = 0.45, ρ = 0.15. The fig3 preset adds K = 0.7 and 2000 trials.
const P_UP: f64 = 0.8;
const HORIZON: f64 = 5.0;
const SIGMA: f64 = 0.25;
const SIGMA_INFORMED: f64 = 0.45;
const RHO: f64 = 0.15;
const THRESHOLD: f64 = 0.7;
const TRIALS: usize = 2000;

fn digital() -> PriorConfig {
    PriorConfig::Binary {
        d0: 0.0,
        d1: 1.0,
        p1: P_UP,
    }
}

fn time_grid(n: usize) -> Vec<f64> {
    (1..n).map(|i| HORIZON * i as f64 / n as f64).collect()
}

pub fn price_preset(name: &str) -> Result<PriceConfig, ConfigError> {
    check_preset(name)?;
    Ok(PriceConfig {
        asset: AssetConfig::Single {
            prior: digital(),
            sigma: SIGMA,
            maturity: HORIZON,
        },
        curve: CurveConfig::Zero,
        times: vec![0.0, 1.0, 2.5, 4.0],
        xi: (0..=20).map(|i| vec![-1.0 + 0.125 * i as f64]).collect(),
    })
}

pub fn simulate_preset(name: &str) -> Result<SimulateConfig, ConfigError> {
    check_preset(name)?;
    Ok(SimulateConfig {
        asset: AssetConfig::Single {
            prior: digital(),
            sigma: SIGMA,
            maturity: HORIZON,
        },
        curve: CurveConfig::Zero,
        steps: 500,
        paths: 20,
        seed: None,
    })
}

pub fn option_preset(name: &str) -> Result<OptionConfig, ConfigError> {
    let strikes = if check_preset(name)? {
        vec![THRESHOLD]
    } else {
        (0..=20).map(|i| 0.05 * i as f64).collect()
    };
    Ok(OptionConfig {
        prior: digital(),
        sigma: SIGMA,
        horizon: HORIZON,
        maturity: 0.5 * HORIZON,
        curve: CurveConfig::Zero,
        strikes,
        paths: 100_000,
        seed: None,
    })
}

pub fn mutual_info_preset(name: &str) -> Result<MutualInfoConfig, ConfigError> {
    check_preset(name)?;
    Ok(MutualInfoConfig {
        prior: digital(),
        sigma: SIGMA,
        sigma_informed: SIGMA_INFORMED,
        rho: RHO,
        horizon: HORIZON,
        times: time_grid(50),
    })
}

pub fn stat_arb_preset(name: &str) -> Result<StatArbConfigFile, ConfigError> {
    check_preset(name)?;
    Ok(StatArbConfigFile {
        prior: digital(),
        sigma: SIGMA,
        sigma_informed: SIGMA_INFORMED,
        rho: RHO,
        horizon: HORIZON,
        threshold: THRESHOLD,
        curve: CurveConfig::Zero,
        times: time_grid(20),
        trials: TRIALS,
        seed: None,
    })
}

pub fn market_sim_preset(name: &str) -> Result<MarketSimConfig, ConfigError> {
    check_preset(name)?;
    Ok(MarketSimConfig {
        prior: digital(),
        curve: CurveConfig::Zero,
        sigmas: vec![SIGMA, SIGMA_INFORMED],
        horizon: HORIZON,
        steps: 500,
        spread: 0.01,
        seed: None,
    })
}
