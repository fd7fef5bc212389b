//! Priors, discount curves, cash-flow structures and the worked bond
//! examples.

use std::fmt;
use std::sync::Arc;

use rand::Rng;

use crate::error::{domain_err, Result};
use crate::numerics::{ln_normal_pdf, std_normal_quantile_tail, Interval};
use crate::stochastic::{std_normal_sample, InfoProcessSpec};

/// Probability mass allowed outside the truncated support of a continuous
/// prior, split evenly between the two tails.
pub const TRUNCATION_MASS: f64 = 1e-30;

/// A continuous prior with analytic tails.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ContinuousFamily {
    Normal {
        mean: f64,
        sd: f64,
    },
    /// `ln X ~ N(mu, s²)`.
    LogNormal {
        mu: f64,
        s: f64,
    },
    Uniform {
        lo: f64,
        hi: f64,
    },
    Exponential {
        rate: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
enum PriorKind {
    Discrete {
        outcomes: Vec<f64>,
        probs: Vec<f64>,
    },
    Continuous {
        family: ContinuousFamily,
        support: Interval,
    },
}

/// The a priori law of one X-factor.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorPrior {
    kind: PriorKind,
}

impl FactorPrior {
    /// Point masses `probs[i]` at `outcomes[i]`.
    pub fn discrete(outcomes: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if outcomes.is_empty() || outcomes.len() != probs.len() {
            return domain_err("a discrete prior needs matching, non-empty outcome and probability lists");
        }
        if !outcomes.iter().all(|d| d.is_finite()) {
            return domain_err("outcomes must be finite");
        }
        if !probs.iter().all(|&p| p > 0.0 && p <= 1.0) {
            return domain_err("probabilities must lie in (0, 1]");
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return domain_err(format!("probabilities sum to {total}, not 1"));
        }
        for (i, a) in outcomes.iter().enumerate() {
            if outcomes[..i].contains(a) {
                return domain_err(format!("outcome {a} listed twice"));
            }
        }
        Ok(Self {
            kind: PriorKind::Discrete { outcomes, probs },
        })
    }

    /// A 0/1 digital factor with `P(X = 1) = p1`. With `p1 = 1` the prior is
    /// a single atom at 1.
    pub fn digital(p1: f64) -> Result<Self> {
        if !(p1 > 0.0 && p1 <= 1.0) {
            return domain_err(format!("digital probability must lie in (0, 1], got {p1}"));
        }
        if p1 == 1.0 {
            return Self::point_mass(1.0);
        }
        Self::discrete(vec![0.0, 1.0], vec![1.0 - p1, p1])
    }

    /// Two outcomes `d0 < d1` with probabilities `1 − p1` and `p1`.
    pub fn binary(d0: f64, d1: f64, p1: f64) -> Result<Self> {
        if !(d0 < d1) {
            return domain_err(format!("binary prior needs d0 < d1, got {d0}, {d1}"));
        }
        if !(p1 > 0.0 && p1 < 1.0) {
            return domain_err(format!("binary probability must lie in (0, 1), got {p1}"));
        }
        Self::discrete(vec![d0, d1], vec![1.0 - p1, p1])
    }

    pub fn point_mass(d: f64) -> Result<Self> {
        Self::discrete(vec![d], vec![1.0])
    }

    pub fn continuous(family: ContinuousFamily) -> Result<Self> {
        let z = std_normal_quantile_tail(0.5 * TRUNCATION_MASS)?;
        let support = match family {
            ContinuousFamily::Normal { mean, sd } => {
                if !(sd > 0.0 && sd.is_finite() && mean.is_finite()) {
                    return domain_err(format!("normal prior needs finite mean and sd > 0, got ({mean}, {sd})"));
                }
                Interval::new(mean - z * sd, mean + z * sd)?
            }
            ContinuousFamily::LogNormal { mu, s } => {
                if !(s > 0.0 && s.is_finite() && mu.is_finite()) {
                    return domain_err(format!("lognormal prior needs finite mu and s > 0, got ({mu}, {s})"));
                }
                Interval::new((mu - z * s).exp(), (mu + z * s).exp())?
            }
            ContinuousFamily::Uniform { lo, hi } => Interval::new(lo, hi)?,
            ContinuousFamily::Exponential { rate } => {
                if !(rate > 0.0 && rate.is_finite()) {
                    return domain_err(format!("exponential prior needs rate > 0, got {rate}"));
                }
                Interval::new(0.0, -(TRUNCATION_MASS.ln()) / rate)?
            }
        };
        Ok(Self {
            kind: PriorKind::Continuous { family, support },
        })
    }

    pub fn normal(mean: f64, sd: f64) -> Result<Self> {
        Self::continuous(ContinuousFamily::Normal { mean, sd })
    }

    pub fn lognormal(mu: f64, s: f64) -> Result<Self> {
        Self::continuous(ContinuousFamily::LogNormal { mu, s })
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self.kind, PriorKind::Discrete { .. })
    }

    /// Outcomes and probabilities of a discrete prior.
    pub fn atoms(&self) -> Option<(&[f64], &[f64])> {
        match &self.kind {
            PriorKind::Discrete { outcomes, probs } => Some((outcomes, probs)),
            PriorKind::Continuous { .. } => None,
        }
    }

    pub fn family(&self) -> Option<ContinuousFamily> {
        match &self.kind {
            PriorKind::Continuous { family, .. } => Some(*family),
            PriorKind::Discrete { .. } => None,
        }
    }

    /// Smallest and largest possible values (the truncated support for
    /// continuous priors).
    pub fn range(&self) -> (f64, f64) {
        match &self.kind {
            PriorKind::Discrete { outcomes, .. } => (
                outcomes.iter().copied().fold(f64::INFINITY, f64::min),
                outcomes.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            ),
            PriorKind::Continuous { support, .. } => (support.lo(), support.hi()),
        }
    }

    /// Truncated support of a continuous prior.
    pub fn support(&self) -> Option<Interval> {
        match &self.kind {
            PriorKind::Continuous { support, .. } => Some(*support),
            PriorKind::Discrete { .. } => None,
        }
    }

    /// Log density of a continuous prior; `-inf` outside its support.
    pub fn ln_density(&self, x: f64) -> f64 {
        let PriorKind::Continuous { family, support } = &self.kind else {
            return f64::NAN;
        };
        if !support.contains(x) {
            return f64::NEG_INFINITY;
        }
        match *family {
            ContinuousFamily::Normal { mean, sd } => ln_normal_pdf(x, mean, sd * sd),
            ContinuousFamily::LogNormal { mu, s } => ln_normal_pdf(x.ln(), mu, s * s) - x.ln(),
            ContinuousFamily::Uniform { lo, hi } => -(hi - lo).ln(),
            ContinuousFamily::Exponential { rate } => rate.ln() - rate * x,
        }
    }

    /// First and second derivatives of the log density of a continuous
    /// prior at an interior point.
    pub(crate) fn ln_density_derivatives(&self, x: f64) -> (f64, f64) {
        let Some(family) = self.family() else {
            return (0.0, 0.0);
        };
        match family {
            ContinuousFamily::Normal { mean, sd } => (-(x - mean) / (sd * sd), -1.0 / (sd * sd)),
            ContinuousFamily::LogNormal { mu, s } => {
                let g = 1.0 + (x.ln() - mu) / (s * s);
                (-g / x, (g - 1.0 / (s * s)) / (x * x))
            }
            ContinuousFamily::Uniform { .. } => (0.0, 0.0),
            ContinuousFamily::Exponential { rate } => (-rate, 0.0),
        }
    }

    pub fn density(&self, x: f64) -> f64 {
        self.ln_density(x).exp()
    }

    pub fn mean(&self) -> f64 {
        match &self.kind {
            PriorKind::Discrete { outcomes, probs } => outcomes.iter().zip(probs).map(|(d, p)| d * p).sum(),
            PriorKind::Continuous { family, .. } => match *family {
                ContinuousFamily::Normal { mean, .. } => mean,
                ContinuousFamily::LogNormal { mu, s } => (mu + 0.5 * s * s).exp(),
                ContinuousFamily::Uniform { lo, hi } => 0.5 * (lo + hi),
                ContinuousFamily::Exponential { rate } => 1.0 / rate,
            },
        }
    }

    pub fn variance(&self) -> f64 {
        match &self.kind {
            PriorKind::Discrete { outcomes, probs } => {
                let m = self.mean();
                outcomes.iter().zip(probs).map(|(d, p)| p * (d - m) * (d - m)).sum()
            }
            PriorKind::Continuous { family, .. } => match *family {
                ContinuousFamily::Normal { sd, .. } => sd * sd,
                ContinuousFamily::LogNormal { mu, s } => (s * s).exp_m1() * (2.0 * mu + s * s).exp(),
                ContinuousFamily::Uniform { lo, hi } => (hi - lo).powi(2) / 12.0,
                ContinuousFamily::Exponential { rate } => 1.0 / (rate * rate),
            },
        }
    }

    /// Shannon entropy in nats of a discrete prior.
    pub fn entropy(&self) -> Option<f64> {
        self.atoms()
            .map(|(_, probs)| -probs.iter().map(|p| p * p.ln()).sum::<f64>())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.kind {
            PriorKind::Discrete { outcomes, probs } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (d, p) in outcomes.iter().zip(probs) {
                    acc += p;
                    if u < acc {
                        return *d;
                    }
                }
                *outcomes.last().expect("non-empty")
            }
            PriorKind::Continuous { family, .. } => match *family {
                ContinuousFamily::Normal { mean, sd } => mean + sd * std_normal_sample(rng),
                ContinuousFamily::LogNormal { mu, s } => (mu + s * std_normal_sample(rng)).exp(),
                ContinuousFamily::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
                ContinuousFamily::Exponential { rate } => -(1.0 - rng.random::<f64>()).ln() / rate,
            },
        }
    }
}

/// A deterministic initial term structure `t ↦ P_0t`.
#[derive(Debug, Clone, PartialEq)]
pub enum DiscountCurve {
    Flat {
        rate: f64,
    },
    /// Log-linear interpolation between tabulated `(t, P_0t)` nodes, with the
    /// last forward rate extended beyond the final node.
    Table {
        times: Vec<f64>,
        ln_p: Vec<f64>,
    },
}

impl DiscountCurve {
    pub fn flat(rate: f64) -> Result<Self> {
        if !(rate >= 0.0 && rate.is_finite()) {
            return domain_err(format!("flat rate must be finite and ≥ 0, got {rate}"));
        }
        Ok(Self::Flat { rate })
    }

    pub fn zero() -> Self {
        Self::Flat { rate: 0.0 }
    }

    /// Nodes `(t, P_0t)`; a node `(0, 1)` is added if absent.
    pub fn table(nodes: &[(f64, f64)]) -> Result<Self> {
        let mut times = vec![0.0];
        let mut ln_p = vec![0.0];
        for &(t, p) in nodes {
            if t == 0.0 {
                if p != 1.0 {
                    return domain_err(format!("P_00 must be 1, got {p}"));
                }
                continue;
            }
            if !(t > *times.last().unwrap() && t.is_finite()) {
                return domain_err("curve times must be positive, finite and strictly increasing");
            }
            if !(p > 0.0 && p <= 1.0) {
                return domain_err(format!("discount factor {p} at t={t} is outside (0, 1]"));
            }
            if p.ln() > *ln_p.last().unwrap() {
                return domain_err(format!("discount factors must be nonincreasing (t={t})"));
            }
            times.push(t);
            ln_p.push(p.ln());
        }
        if times.len() < 2 {
            return domain_err("a tabulated curve needs at least one node after t = 0");
        }
        Ok(Self::Table { times, ln_p })
    }

    /// `P_0t`.
    pub fn initial(&self, t: f64) -> f64 {
        self.ln_initial(t).exp()
    }

    fn ln_initial(&self, t: f64) -> f64 {
        match self {
            Self::Flat { rate } => -rate * t,
            Self::Table { times, ln_p } => {
                let k = times.partition_point(|&s| s <= t).clamp(1, times.len() - 1);
                let (t0, t1) = (times[k - 1], times[k]);
                let w = (t - t0) / (t1 - t0);
                ln_p[k - 1] + w * (ln_p[k] - ln_p[k - 1])
            }
        }
    }

    /// `P_tT = P_0T / P_0t`, exactly 1 when `t = T`.
    pub fn discount(&self, t: f64, maturity: f64) -> Result<f64> {
        if !(t >= 0.0 && t <= maturity) {
            return domain_err(format!("discount needs 0 ≤ t ≤ T, got t={t}, T={maturity}"));
        }
        if t == maturity {
            return Ok(1.0);
        }
        Ok((self.ln_initial(maturity) - self.ln_initial(t)).exp())
    }

    /// Instantaneous forward rate at `t`.
    pub fn short_rate(&self, t: f64) -> f64 {
        match self {
            Self::Flat { rate } => *rate,
            Self::Table { times, ln_p } => {
                let k = times.partition_point(|&s| s <= t).clamp(1, times.len() - 1);
                -(ln_p[k] - ln_p[k - 1]) / (times[k] - times[k - 1])
            }
        }
    }
}

type FlowFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// A cash-flow function `Δ(x_1, …, x_k)`. It only ever receives the factors
/// realized by its own payment date.
#[derive(Clone)]
pub struct CashFlow(Arc<FlowFn>);

impl CashFlow {
    pub fn new(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self(Arc::new(f))
    }

    pub fn zero() -> Self {
        Self::new(|_| 0.0)
    }

    /// `scale · x_k`, the latest factor.
    pub fn latest(scale: f64) -> Self {
        Self::new(move |x| scale * x[x.len() - 1])
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.0)(x)
    }
}

impl fmt::Debug for CashFlow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("CashFlow(..)")
    }
}

/// Payment dates with one cash-flow function per date.
#[derive(Debug, Clone)]
pub struct CashFlowSpec {
    dates: Vec<f64>,
    flows: Vec<CashFlow>,
}

impl CashFlowSpec {
    pub fn new(dates: Vec<f64>, flows: Vec<CashFlow>) -> Result<Self> {
        if dates.is_empty() {
            return domain_err("a cash-flow structure needs at least one payment date");
        }
        if dates.len() != flows.len() {
            return domain_err(format!("{} dates but {} cash-flow functions", dates.len(), flows.len()));
        }
        if !(dates[0] > 0.0) || !dates.windows(2).all(|w| w[0] < w[1]) || !dates.iter().all(|d| d.is_finite()) {
            return domain_err("payment dates must be positive, finite and strictly increasing");
        }
        Ok(Self { dates, flows })
    }

    pub fn dates(&self) -> &[f64] {
        &self.dates
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    /// `Δ_Tk` evaluated on the first `k + 1` entries of `factors`.
    pub fn flow(&self, k: usize, factors: &[f64]) -> f64 {
        self.flows[k].eval(&factors[..=k])
    }
}

/// A security: its cash flows with one prior and one information process
/// per payment date.
#[derive(Debug, Clone)]
pub struct AssetSpec {
    cashflows: CashFlowSpec,
    priors: Vec<FactorPrior>,
    info: Vec<InfoProcessSpec>,
}

impl AssetSpec {
    pub fn new(cashflows: CashFlowSpec, priors: Vec<FactorPrior>, info: Vec<InfoProcessSpec>) -> Result<Self> {
        let n = cashflows.len();
        if priors.len() != n || info.len() != n {
            return domain_err(format!(
                "{n} payment dates need as many priors and information processes (got {} and {})",
                priors.len(),
                info.len()
            ));
        }
        for (k, (spec, date)) in info.iter().zip(cashflows.dates()).enumerate() {
            if spec.horizon() != *date {
                return domain_err(format!(
                    "factor {k}: information horizon {} differs from its payment date {date}",
                    spec.horizon()
                ));
            }
        }
        let asset = Self {
            cashflows,
            priors,
            info,
        };
        asset.check_flows_finite()?;
        Ok(asset)
    }

    fn check_flows_finite(&self) -> Result<()> {
        // Probe every combination of discrete atoms and support endpoints.
        let pts: Vec<Vec<f64>> = self
            .priors
            .iter()
            .map(|p| match p.atoms() {
                Some((d, _)) => d.to_vec(),
                None => {
                    let (lo, hi) = p.range();
                    vec![lo, 0.5 * (lo + hi), hi]
                }
            })
            .collect();
        let total: usize = pts.iter().map(Vec::len).product();
        if total > 100_000 {
            return Ok(());
        }
        let mut idx = vec![0usize; pts.len()];
        let mut x = vec![0.0; pts.len()];
        for _ in 0..total {
            for (j, &i) in idx.iter().enumerate() {
                x[j] = pts[j][i];
            }
            for k in 0..self.cashflows.len() {
                let v = self.cashflows.flow(k, &x);
                if !v.is_finite() {
                    return domain_err(format!("cash flow {k} is not finite at factors {:?}", &x[..=k]));
                }
            }
            for j in 0..idx.len() {
                idx[j] += 1;
                if idx[j] < pts[j].len() {
                    break;
                }
                idx[j] = 0;
            }
        }
        Ok(())
    }

    pub fn cashflows(&self) -> &CashFlowSpec {
        &self.cashflows
    }

    pub fn dates(&self) -> &[f64] {
        self.cashflows.dates()
    }

    pub fn priors(&self) -> &[FactorPrior] {
        &self.priors
    }

    pub fn info_specs(&self) -> &[InfoProcessSpec] {
        &self.info
    }

    pub fn factor_count(&self) -> usize {
        self.priors.len()
    }

    pub fn all_discrete(&self) -> bool {
        self.priors.iter().all(FactorPrior::is_discrete)
    }
}

fn check_probability(name: &str, p: f64) -> Result<()> {
    if !(p > 0.0 && p <= 1.0) {
        return domain_err(format!("{name} must lie in (0, 1], got {p}"));
    }
    Ok(())
}

fn check_recovery(name: &str, r: f64) -> Result<()> {
    if !(0.0..1.0).contains(&r) {
        return domain_err(format!("recovery rate {name} must lie in [0, 1), got {r}"));
    }
    Ok(())
}

fn digital_pair(
    p1: f64,
    p2: f64,
    sigmas: (f64, f64),
    t1: f64,
    t2: f64,
) -> Result<(Vec<FactorPrior>, Vec<InfoProcessSpec>)> {
    check_probability("p1", p1)?;
    check_probability("p2", p2)?;
    if !(t1 < t2) {
        return domain_err(format!("need T1 < T2, got {t1}, {t2}"));
    }
    Ok((
        vec![FactorPrior::digital(p1)?, FactorPrior::digital(p2)?],
        vec![InfoProcessSpec::new(sigmas.0, t1)?, InfoProcessSpec::new(sigmas.1, t2)?],
    ))
}

/// Credit-risky bond with two remaining coupons and no recovery:
/// `D_T1 = c X_1`, `D_T2 = (c + n) X_1 X_2`.
pub fn two_coupon_bond(c: f64, n: f64, p1: f64, p2: f64, sigmas: (f64, f64), t1: f64, t2: f64) -> Result<AssetSpec> {
    let (priors, info) = digital_pair(p1, p2, sigmas, t1, t2)?;
    let flows = vec![
        CashFlow::new(move |x| c * x[0]),
        CashFlow::new(move |x| (c + n) * x[0] * x[1]),
    ];
    AssetSpec::new(CashFlowSpec::new(vec![t1, t2], flows)?, priors, info)
}

/// Two-coupon bond paying a fraction `R_k` of `c + n` on default at `T_k`.
#[allow(clippy::too_many_arguments)]
pub fn recovery_bond(
    c: f64,
    n: f64,
    r1: f64,
    r2: f64,
    p1: f64,
    p2: f64,
    sigmas: (f64, f64),
    t1: f64,
    t2: f64,
) -> Result<AssetSpec> {
    check_recovery("R1", r1)?;
    check_recovery("R2", r2)?;
    let (priors, info) = digital_pair(p1, p2, sigmas, t1, t2)?;
    let cn = c + n;
    let flows = vec![
        CashFlow::new(move |x| c * x[0] + r1 * cn * (1.0 - x[0])),
        CashFlow::new(move |x| cn * x[0] * x[1] + r2 * cn * x[0] * (1.0 - x[1])),
    ];
    AssetSpec::new(CashFlowSpec::new(vec![t1, t2], flows)?, priors, info)
}

/// Recovery parameters of the restaurant bond.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RestaurantRecovery {
    /// Restaurant fails because the factory fails.
    pub a: f64,
    /// Restaurant fails through bad management.
    pub b: f64,
    /// Both fail.
    pub c: f64,
}

/// `(β, γ, δ)` for principal `n2`: `∂D_T2/∂X_1 = β + δX_2` and
/// `∂D_T2/∂X_2 = γ + δX_1`.
pub fn restaurant_constants(n2: f64, r: RestaurantRecovery) -> (f64, f64, f64) {
    (n2 * (r.b - r.c), n2 * (r.a - r.c), n2 * (1.0 - r.a - r.b + r.c))
}

/// A factory bond paying at `T1` and a restaurant bond paying at `T2` that
/// share the factory's factor `X_1`.
///
/// The restaurant is returned with dates `[T1, T2]` and a zero flow at `T1`,
/// so factor indices line up between the two assets.
#[allow(clippy::too_many_arguments)]
pub fn factory_restaurant(
    n1: f64,
    n2: f64,
    r1: f64,
    r2: RestaurantRecovery,
    p1: f64,
    p2: f64,
    sigmas: (f64, f64),
    t1: f64,
    t2: f64,
) -> Result<(AssetSpec, AssetSpec)> {
    check_recovery("R1", r1)?;
    check_recovery("R2a", r2.a)?;
    check_recovery("R2b", r2.b)?;
    check_recovery("R2c", r2.c)?;
    let (priors, info) = digital_pair(p1, p2, sigmas, t1, t2)?;
    let factory = AssetSpec::new(
        CashFlowSpec::new(
            vec![t1],
            vec![CashFlow::new(move |x| n1 * x[0] + r1 * n1 * (1.0 - x[0]))],
        )?,
        vec![priors[0].clone()],
        vec![info[0]],
    )?;
    let restaurant_flow = CashFlow::new(move |x| {
        let (x1, x2) = (x[0], x[1]);
        n2 * (x1 * x2 + r2.a * (1.0 - x1) * x2 + r2.b * x1 * (1.0 - x2) + r2.c * (1.0 - x1) * (1.0 - x2))
    });
    let restaurant = AssetSpec::new(
        CashFlowSpec::new(vec![t1, t2], vec![CashFlow::zero(), restaurant_flow])?,
        priors,
        info,
    )?;
    Ok((factory, restaurant))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::integrate;
    use crate::stochastic::substream;

    #[test]
    fn discrete_validation() {
        assert!(FactorPrior::discrete(vec![0.0, 1.0], vec![0.5, 0.4]).is_err());
        assert!(FactorPrior::discrete(vec![0.0, 1.0], vec![1.0, 0.0]).is_err());
        assert!(FactorPrior::discrete(vec![1.0, 1.0], vec![0.5, 0.5]).is_err());
        assert!(FactorPrior::digital(0.0).is_err());
        let one = FactorPrior::digital(1.0).unwrap();
        assert_eq!(one.atoms().unwrap(), (&[1.0][..], &[1.0][..]));
    }

    #[test]
    fn discrete_moments_match_brute_force() {
        let d = vec![-1.0, 0.5, 2.0, 7.0];
        let p = vec![0.125, 0.25, 0.5, 0.125];
        let prior = FactorPrior::discrete(d.clone(), p.clone()).unwrap();
        let mut m = 0.0;
        for i in 0..4 {
            m += d[i] * p[i];
        }
        let mut v = 0.0;
        for i in 0..4 {
            v += p[i] * (d[i] - m) * (d[i] - m);
        }
        assert_eq!(prior.mean(), m);
        assert_eq!(prior.variance(), v);
        let h = FactorPrior::digital(0.8).unwrap().entropy().unwrap();
        assert!((h - 0.500_402_423_538_187_9).abs() < 1e-15);
    }

    #[test]
    fn continuous_families_normalize_and_truncate() {
        let families = [
            FactorPrior::normal(0.3, 2.0).unwrap(),
            FactorPrior::lognormal(-0.1, 0.4).unwrap(),
            FactorPrior::continuous(ContinuousFamily::Uniform { lo: -1.0, hi: 3.0 }).unwrap(),
            FactorPrior::continuous(ContinuousFamily::Exponential { rate: 2.5 }).unwrap(),
        ];
        for prior in &families {
            let support = prior.support().unwrap();
            let f = |x: f64| prior.density(x);
            let mass = integrate(f, support, 1e-12).unwrap();
            assert!((mass - 1.0).abs() < 1e-9, "{prior:?}: {mass}");
            assert!(1.0 - mass < 1.1e-12 + 1e-13, "{prior:?}: omitted {}", 1.0 - mass);
            let mean = integrate(|x| x * prior.density(x), support, 1e-12).unwrap();
            assert!((mean - prior.mean()).abs() < 1e-8 * (1.0 + prior.mean().abs()));
            let var = integrate(|x| (x - mean).powi(2) * prior.density(x), support, 1e-12).unwrap();
            assert!((var - prior.variance()).abs() < 1e-8 * (1.0 + prior.variance()));
        }
        assert!(FactorPrior::normal(0.0, 0.0).is_err());
        assert!(FactorPrior::lognormal(0.0, -1.0).is_err());
    }

    #[test]
    fn sampling_matches_moments() {
        let prior = FactorPrior::discrete(vec![0.0, 1.0, 3.0], vec![0.2, 0.5, 0.3]).unwrap();
        let mut rng = substream(1, 99, 0);
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| prior.sample(&mut rng)).collect();
        let (m, se) = crate::stochastic::mean_and_stderr(&xs);
        assert!((m - prior.mean()).abs() < 4.0 * se);
        let ln = FactorPrior::lognormal(0.0, 0.5).unwrap();
        let ys: Vec<f64> = (0..n).map(|_| ln.sample(&mut rng)).collect();
        let (m, se) = crate::stochastic::mean_and_stderr(&ys);
        assert!((m - ln.mean()).abs() < 4.0 * se);
    }

    #[test]
    fn flat_curve() {
        let c = DiscountCurve::flat(0.05).unwrap();
        assert_eq!(c.discount(2.0, 2.0).unwrap(), 1.0);
        assert!((c.discount(0.0, 2.0).unwrap() - (-0.1f64).exp()).abs() < 1e-16);
        assert!(c.discount(3.0, 2.0).is_err());
        assert!(DiscountCurve::flat(-0.01).is_err());
    }

    #[test]
    fn table_curve() {
        let c = DiscountCurve::table(&[(1.0, 0.97), (3.0, 0.9), (5.0, 0.85)]).unwrap();
        assert_eq!(c.initial(0.0), 1.0);
        assert!((c.initial(1.0) - 0.97).abs() < 1e-15);
        assert!((c.initial(2.0) - (0.97f64 * 0.9).sqrt()).abs() < 1e-15);
        let fwd = -(0.85f64 / 0.9).ln() / 2.0;
        assert!((c.initial(6.0) - 0.85 * (-fwd).exp()).abs() < 1e-14);
        assert!((c.short_rate(4.0) - fwd).abs() < 1e-15);
        assert!(DiscountCurve::table(&[(1.0, 0.9), (2.0, 0.95)]).is_err());
        assert!(DiscountCurve::table(&[(0.0, 0.9)]).is_err());
    }

    #[test]
    fn curve_multiplicative() {
        let curves = [
            DiscountCurve::flat(0.03).unwrap(),
            DiscountCurve::table(&[(0.5, 0.99), (2.0, 0.95), (4.0, 0.88)]).unwrap(),
        ];
        for c in &curves {
            for &(t, s) in &[(0.3, 1.7), (1.0, 3.5), (2.0, 5.0)] {
                let lhs = c.discount(0.0, t).unwrap() * c.discount(t, s).unwrap();
                assert!((lhs - c.discount(0.0, s).unwrap()).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn two_coupon_flows() {
        let a = two_coupon_bond(5.0, 100.0, 0.9, 0.9, (0.2, 0.2), 1.0, 2.0).unwrap();
        let cf = a.cashflows();
        assert_eq!((cf.flow(0, &[1.0, 1.0]), cf.flow(1, &[1.0, 1.0])), (5.0, 105.0));
        assert_eq!((cf.flow(0, &[0.0, 1.0]), cf.flow(1, &[0.0, 1.0])), (0.0, 0.0));
        assert_eq!((cf.flow(0, &[0.0, 0.0]), cf.flow(1, &[0.0, 0.0])), (0.0, 0.0));
        assert_eq!((cf.flow(0, &[1.0, 0.0]), cf.flow(1, &[1.0, 0.0])), (5.0, 0.0));
        assert!(two_coupon_bond(5.0, 100.0, 1.2, 0.9, (0.2, 0.2), 1.0, 2.0).is_err());
        assert!(two_coupon_bond(5.0, 100.0, 0.9, 0.9, (0.2, 0.2), 2.0, 1.0).is_err());
    }

    #[test]
    fn recovery_flows() {
        let a = recovery_bond(5.0, 100.0, 0.4, 0.3, 0.9, 0.8, (0.2, 0.2), 1.0, 2.0).unwrap();
        let cf = a.cashflows();
        assert_eq!(cf.flow(0, &[0.0, 1.0]), 0.4 * 105.0);
        assert_eq!(cf.flow(1, &[0.0, 1.0]), 0.0);
        assert_eq!(cf.flow(0, &[1.0, 0.0]), 5.0);
        assert_eq!(cf.flow(1, &[1.0, 0.0]), 0.3 * 105.0);
        assert!(recovery_bond(5.0, 100.0, 1.0, 0.3, 0.9, 0.8, (0.2, 0.2), 1.0, 2.0).is_err());

        let plain = two_coupon_bond(5.0, 100.0, 0.9, 0.8, (0.2, 0.2), 1.0, 2.0).unwrap();
        let zero_rec = recovery_bond(5.0, 100.0, 0.0, 0.0, 0.9, 0.8, (0.2, 0.2), 1.0, 2.0).unwrap();
        for x in [[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]] {
            for k in 0..2 {
                assert_eq!(plain.cashflows().flow(k, &x), zero_rec.cashflows().flow(k, &x));
            }
        }
    }

    #[test]
    fn factory_restaurant_flows() {
        let rec = RestaurantRecovery { a: 0.3, b: 0.5, c: 0.1 };
        let (f, r) = factory_restaurant(100.0, 50.0, 0.4, rec, 0.9, 0.8, (0.3, 0.2), 2.0, 4.0).unwrap();
        assert_eq!(f.cashflows().flow(0, &[1.0]), 100.0);
        assert_eq!(f.cashflows().flow(0, &[0.0]), 40.0);
        assert_eq!(r.cashflows().flow(1, &[1.0, 1.0]), 50.0);
        assert_eq!(r.cashflows().flow(1, &[0.0, 0.0]), 0.1 * 50.0);
        assert_eq!(r.cashflows().flow(0, &[1.0, 1.0]), 0.0);
        let (beta, gamma, delta) = restaurant_constants(50.0, rec);
        assert!((beta - 20.0).abs() < 1e-12);
        assert!((gamma - 10.0).abs() < 1e-12);
        assert!((delta - 15.0).abs() < 1e-12);
        // The constants are the partial differences of the flow on the 0/1 lattice.
        let d = |x1: f64, x2: f64| r.cashflows().flow(1, &[x1, x2]);
        for x2 in [0.0, 1.0] {
            assert!((d(1.0, x2) - d(0.0, x2) - (beta + delta * x2)).abs() < 1e-12);
        }
        for x1 in [0.0, 1.0] {
            assert!((d(x1, 1.0) - d(x1, 0.0) - (gamma + delta * x1)).abs() < 1e-12);
        }
    }

    #[test]
    fn flows_see_only_their_own_factors() {
        let a = two_coupon_bond(5.0, 100.0, 0.9, 0.9, (0.2, 0.2), 1.0, 2.0).unwrap();
        // A NaN sentinel beyond index k would poison the value if read.
        assert!(a.cashflows().flow(0, &[1.0, f64::NAN]).is_finite());
        let probe = CashFlowSpec::new(
            vec![1.0, 2.0],
            vec![CashFlow::new(|x| x.len() as f64), CashFlow::new(|x| x.len() as f64)],
        )
        .unwrap();
        assert_eq!(probe.flow(0, &[0.0, 0.0, 0.0]), 1.0);
        assert_eq!(probe.flow(1, &[0.0, 0.0, 0.0]), 2.0);
    }

    #[test]
    fn asset_validation() {
        let cf = CashFlowSpec::new(vec![1.0], vec![CashFlow::latest(1.0)]).unwrap();
        let bad = AssetSpec::new(
            cf.clone(),
            vec![FactorPrior::digital(0.5).unwrap()],
            vec![InfoProcessSpec::new(0.2, 2.0).unwrap()],
        );
        assert!(bad.is_err());
        assert!(CashFlowSpec::new(vec![], vec![]).is_err());
        let inf = CashFlowSpec::new(vec![1.0], vec![CashFlow::new(|x| 1.0 / x[0])]).unwrap();
        assert!(AssetSpec::new(
            inf,
            vec![FactorPrior::digital(0.5).unwrap()],
            vec![InfoProcessSpec::new(0.2, 1.0).unwrap()]
        )
        .is_err());
    }
}
