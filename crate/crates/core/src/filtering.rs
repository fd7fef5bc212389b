//! Conditional laws of X-factors given information-process observations,
//! and the prices they imply.
//!
//! Every observation model here is Gaussian-linear in the factor, so the
//! evidence collapses to a likelihood `exp(a x − b x²/2)`. A single signal
//! `ξ_t` of a process with rate `σ` and horizon `T` gives
//! `a = σξT/(T−t)` and `b = σ²tT/(T−t)`.

use std::cell::RefCell;

use crate::error::{domain_err, Error, Result};
use crate::market::{AssetSpec, DiscountCurve, FactorPrior};
use crate::numerics::{
    find_root_monotone_with_derivative, graded_breaks, integrate_with_breaks, log_sum_exp, normalize_log_weights,
    Interval,
};
use crate::stochastic::InfoProcessSpec;

/// Conditioning is refused within this fraction of the horizon.
pub const HORIZON_GUARD: f64 = 1e-9;

/// Relative tolerance for snapping a terminal observation onto an atom.
pub const REVEAL_SNAP: f64 = 1e-9;

/// Gaussian-linear evidence: the likelihood of the observations is
/// proportional to `exp(a x − b x²/2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evidence {
    pub a: f64,
    pub b: f64,
}

impl Evidence {
    pub const NONE: Evidence = Evidence { a: 0.0, b: 0.0 };

    /// Evidence carried by `ξ_t = value` (valid for `t < T`).
    pub fn single(spec: &InfoProcessSpec, t: f64, value: f64) -> Self {
        let horizon = spec.horizon();
        let k = horizon / (horizon - t);
        let sigma = spec.sigma();
        Self {
            a: k * sigma * value,
            b: k * sigma * sigma * t,
        }
    }

    pub fn is_none(&self) -> bool {
        self.a == 0.0 && self.b == 0.0
    }

    pub fn ln_likelihood(&self, x: f64) -> f64 {
        self.a * x - 0.5 * self.b * x * x
    }

    /// `ln_likelihood` less the constant `a²/(2b)`, written as
    /// `−b(x − a/b)²/2` to avoid cancellation when `a` and `b` are large.
    fn ln_likelihood_centered(&self, x: f64) -> f64 {
        if self.b > 0.0 {
            let d = x - self.a / self.b;
            -0.5 * self.b * d * d
        } else {
            self.a * x
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct ContinuousPosterior {
    support: Interval,
    peak: f64,
    scale: f64,
    /// `ℓ(peak)` in uncentered form, where `ℓ = ln p + ln likelihood`.
    ln_peak: f64,
    /// `a − b·peak`, the likelihood slope at the peak.
    peak_slope: f64,
    /// `ln ∫ exp(ℓ(x) − ℓ(peak)) dx`.
    ln_z: f64,
    breaks: Vec<f64>,
}

impl ContinuousPosterior {
    /// `ℓ(x) − ℓ(peak)`, expanded about the peak so that large evidence
    /// terms cancel exactly rather than in floating point.
    fn ln_ratio(&self, prior: &FactorPrior, ev: Evidence, x: f64) -> f64 {
        let d = x - self.peak;
        prior.ln_density(x) - prior.ln_density(self.peak) + d * self.peak_slope - 0.5 * ev.b * d * d
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Repr {
    Discrete { outcomes: Vec<f64>, weights: Vec<f64> },
    Continuous(ContinuousPosterior),
}

/// The conditional law of one factor at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorState {
    prior: FactorPrior,
    t: f64,
    evidence: Evidence,
    repr: Repr,
}

impl PosteriorState {
    /// Updates `prior` by `evidence` gathered up to time `t`.
    pub fn from_evidence(prior: &FactorPrior, t: f64, evidence: Evidence) -> Result<Self> {
        if !(evidence.a.is_finite() && evidence.b.is_finite() && evidence.b >= 0.0) {
            return domain_err(format!("invalid evidence {evidence:?}"));
        }
        let repr = match prior.atoms() {
            Some((outcomes, probs)) => {
                let weights = if evidence.is_none() {
                    probs.to_vec()
                } else {
                    let logw: Vec<f64> = outcomes
                        .iter()
                        .zip(probs)
                        .map(|(&d, &p)| p.ln() + evidence.ln_likelihood(d))
                        .collect();
                    normalize_log_weights(&logw)?
                };
                Repr::Discrete {
                    outcomes: outcomes.to_vec(),
                    weights,
                }
            }
            None => Repr::Continuous(continuous_posterior(prior, evidence)?),
        };
        Ok(Self {
            prior: prior.clone(),
            t,
            evidence,
            repr,
        })
    }

    /// A point mass at `x`, as after revelation.
    pub fn revealed(prior: &FactorPrior, t: f64, x: f64) -> Self {
        Self {
            prior: prior.clone(),
            t,
            evidence: Evidence::NONE,
            repr: Repr::Discrete {
                outcomes: vec![x],
                weights: vec![1.0],
            },
        }
    }

    pub fn prior(&self) -> &FactorPrior {
        &self.prior
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn evidence(&self) -> Evidence {
        self.evidence
    }

    /// Outcomes and posterior weights, for discrete laws.
    pub fn atoms(&self) -> Option<(&[f64], &[f64])> {
        match &self.repr {
            Repr::Discrete { outcomes, weights } => Some((outcomes, weights)),
            Repr::Continuous(_) => None,
        }
    }

    pub fn is_point_mass(&self) -> bool {
        matches!(&self.repr, Repr::Discrete { outcomes, .. } if outcomes.len() == 1)
    }

    /// Posterior density of a continuous law.
    pub fn density(&self, x: f64) -> f64 {
        match &self.repr {
            Repr::Continuous(c) => {
                if self.evidence.is_none() {
                    self.prior.density(x)
                } else {
                    (c.ln_ratio(&self.prior, self.evidence, x) - c.ln_z).exp()
                }
            }
            Repr::Discrete { .. } => f64::NAN,
        }
    }

    /// Integration domain and break points of a continuous law.
    pub fn quadrature_layout(&self) -> Option<(Interval, &[f64])> {
        match &self.repr {
            Repr::Continuous(c) => Some((c.support, &c.breaks)),
            Repr::Discrete { .. } => None,
        }
    }

    /// `E_t[f(X)]`.
    pub fn expect<F: Fn(f64) -> f64>(&self, f: F) -> Result<f64> {
        match &self.repr {
            Repr::Discrete { outcomes, weights } => Ok(outcomes.iter().zip(weights).map(|(&d, &w)| w * f(d)).sum()),
            Repr::Continuous(c) => {
                let probe = [c.peak - 3.0 * c.scale, c.peak, c.peak + 3.0 * c.scale];
                let magnitude: f64 = probe.iter().map(|&x| f(c.support.clamp(x)).abs()).sum();
                let tol = 1e-12 * (1e-300 + magnitude);
                integrate_with_breaks(|x| f(x) * self.density(x), c.support, &c.breaks, tol)
            }
        }
    }

    /// Shannon entropy (nats) of a discrete posterior.
    pub fn entropy(&self) -> Option<f64> {
        self.atoms()
            .map(|(_, w)| -w.iter().filter(|&&p| p > 0.0).map(|p| p * p.ln()).sum::<f64>())
    }

    pub fn mean(&self) -> Result<f64> {
        match &self.repr {
            Repr::Discrete { outcomes, weights } => Ok(outcomes.iter().zip(weights).map(|(d, w)| d * w).sum()),
            Repr::Continuous(_) => self.expect(|x| x),
        }
    }

    /// `ln E_prior[exp(a X − b X²/2)]`, the log of the normalizer that
    /// turns prior into posterior.
    pub fn ln_marginal_likelihood(&self) -> f64 {
        if self.evidence.is_none() {
            return 0.0;
        }
        match &self.repr {
            Repr::Discrete { .. } => {
                let (outcomes, probs) = self.prior.atoms().expect("discrete prior");
                let terms: Vec<f64> = outcomes
                    .iter()
                    .zip(probs)
                    .map(|(&d, &p)| p.ln() + self.evidence.ln_likelihood(d))
                    .collect();
                log_sum_exp(&terms)
            }
            Repr::Continuous(c) => c.ln_peak + c.ln_z,
        }
    }
}

fn continuous_posterior(prior: &FactorPrior, ev: Evidence) -> Result<ContinuousPosterior> {
    let support = prior.support().expect("continuous prior has a support");
    let ell = |x: f64| prior.ln_density(x) + ev.ln_likelihood_centered(x);
    let slope = |x: f64| prior.ln_density_derivatives(x).0 + ev.a - ev.b * x;
    let curvature = |x: f64| prior.ln_density_derivatives(x).1 - ev.b;

    // Coarse scan, then a Newton/bisection solve of ℓ'(x) = 0 next to the best node.
    const SCAN: usize = 64;
    let node = |i: usize| support.lo() + support.width() * i as f64 / SCAN as f64;
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for i in 0..=SCAN {
        let v = ell(node(i));
        if v > best_val {
            best_val = v;
            best = i;
        }
    }
    let lo = node(best.saturating_sub(1));
    let hi = node((best + 1).min(SCAN));
    let (s_lo, s_hi) = (slope(lo), slope(hi));
    let mut peak = node(best);
    if s_lo > 0.0 && s_hi < 0.0 {
        let bracket = Interval::new(lo, hi)?;
        peak = find_root_monotone_with_derivative(slope, curvature, bracket, 1e-15 * (1.0 + peak.abs()))?;
    }
    let curv = curvature(peak);
    let mut scale = if curv < 0.0 {
        (1.0 / (-curv).sqrt()).min(support.width())
    } else {
        support.width() / SCAN as f64
    };
    // A mode pinned to the edge of the support decays like exp(−|ℓ'| d).
    let edge_slope = slope(peak).abs();
    if edge_slope > 0.0 && (peak == support.lo() || peak == support.hi()) {
        scale = scale.min(1.0 / edge_slope);
    }
    let breaks = graded_breaks(peak, scale, support);
    let mut post = ContinuousPosterior {
        support,
        peak,
        scale,
        ln_peak: prior.ln_density(peak) + ev.ln_likelihood(peak),
        peak_slope: ev.a - ev.b * peak,
        ln_z: 0.0,
        breaks,
    };
    if ev.is_none() {
        return Ok(post);
    }
    let z = integrate_with_breaks(
        |x| post.ln_ratio(prior, ev, x).exp(),
        support,
        &post.breaks,
        1e-13 * scale,
    )?;
    post.ln_z = z.ln();
    Ok(post)
}

fn check_time(spec: &InfoProcessSpec, t: f64) -> Result<()> {
    let horizon = spec.horizon();
    if !(t >= 0.0) {
        return domain_err(format!("conditioning time must be ≥ 0, got {t}"));
    }
    if t >= horizon * (1.0 - HORIZON_GUARD) {
        return Err(Error::Horizon { t, horizon });
    }
    Ok(())
}

/// The law of `X` given `ξ_t = xi` for a single information process.
pub fn posterior_single(prior: &FactorPrior, spec: &InfoProcessSpec, t: f64, xi: f64) -> Result<PosteriorState> {
    check_time(spec, t)?;
    if !xi.is_finite() {
        return domain_err(format!("observation must be finite, got {xi}"));
    }
    PosteriorState::from_evidence(prior, t, Evidence::single(spec, t, xi))
}

/// The point mass `X = ξ_T/(σT)`, snapped onto the nearest atom for a
/// discrete prior.
pub fn reveal_at_horizon(prior: &FactorPrior, spec: &InfoProcessSpec, xi_terminal: f64) -> Result<PosteriorState> {
    let scale = spec.sigma() * spec.horizon();
    if scale == 0.0 {
        return domain_err("a process with zero information flow rate reveals nothing");
    }
    let x = xi_terminal / scale;
    let x = match prior.atoms() {
        Some((outcomes, _)) => {
            let nearest = outcomes
                .iter()
                .copied()
                .min_by(|a, b| (a - x).abs().total_cmp(&(b - x).abs()))
                .expect("non-empty");
            if (nearest * scale - xi_terminal).abs() > REVEAL_SNAP * scale {
                return Err(Error::Inconsistent(format!(
                    "terminal value {xi_terminal} does not match any outcome (nearest {nearest})"
                )));
            }
            nearest
        }
        None => x,
    };
    Ok(PosteriorState::revealed(prior, spec.horizon(), x))
}

/// One recorded value of one information process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub process: usize,
    pub time: f64,
    pub value: f64,
}

/// Observations of several information processes about the same factor,
/// with the correlation matrix of their bridge noises.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    specs: Vec<InfoProcessSpec>,
    corr: Vec<Vec<f64>>,
    obs: Vec<Observation>,
}

impl ObservationSet {
    pub fn new(specs: Vec<InfoProcessSpec>, corr: Vec<Vec<f64>>) -> Result<Self> {
        let n = specs.len();
        if n == 0 {
            return domain_err("need at least one information process");
        }
        let horizon = specs[0].horizon();
        if specs.iter().any(|s| s.horizon() != horizon) {
            return domain_err("all processes about one factor share its horizon");
        }
        if corr.len() != n || corr.iter().any(|row| row.len() != n) {
            return domain_err(format!("correlation matrix must be {n}×{n}"));
        }
        for i in 0..n {
            if corr[i][i] != 1.0 {
                return domain_err("correlation matrix needs a unit diagonal");
            }
            for j in 0..n {
                if corr[i][j] != corr[j][i] || !(-1.0..=1.0).contains(&corr[i][j]) {
                    return domain_err("correlation matrix must be symmetric with entries in [-1, 1]");
                }
            }
        }
        if !is_positive_semidefinite(&corr) {
            return domain_err("correlation matrix is not positive semidefinite");
        }
        Ok(Self {
            specs,
            corr,
            obs: Vec::new(),
        })
    }

    /// Processes with mutually independent noises.
    pub fn independent(specs: Vec<InfoProcessSpec>) -> Result<Self> {
        let n = specs.len();
        let corr = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Self::new(specs, corr)
    }

    /// Two processes with noise correlation `rho`.
    pub fn pair(first: InfoProcessSpec, second: InfoProcessSpec, rho: f64) -> Result<Self> {
        Self::new(vec![first, second], vec![vec![1.0, rho], vec![rho, 1.0]])
    }

    pub fn push(&mut self, process: usize, time: f64, value: f64) -> Result<()> {
        let Some(spec) = self.specs.get(process) else {
            return domain_err(format!("unknown process {process}"));
        };
        if !(time >= 0.0 && time <= spec.horizon()) || !value.is_finite() {
            return domain_err(format!("observation ({time}, {value}) is outside [0, T] or not finite"));
        }
        self.obs.push(Observation { process, time, value });
        Ok(())
    }

    pub fn with(mut self, process: usize, time: f64, value: f64) -> Result<Self> {
        self.push(process, time, value)?;
        Ok(self)
    }

    pub fn horizon(&self) -> f64 {
        self.specs[0].horizon()
    }

    pub fn specs(&self) -> &[InfoProcessSpec] {
        &self.specs
    }

    pub fn correlation(&self, i: usize, j: usize) -> f64 {
        self.corr[i][j]
    }

    pub fn observations(&self) -> &[Observation] {
        &self.obs
    }

    /// Bridge-noise covariance between two observations.
    pub fn noise_covariance(&self, a: &Observation, b: &Observation) -> f64 {
        let horizon = self.horizon();
        let (lo, hi) = if a.time <= b.time {
            (a.time, b.time)
        } else {
            (b.time, a.time)
        };
        self.corr[a.process][b.process] * lo * (horizon - hi) / horizon
    }

    /// The observations that carry information: drops time-zero values,
    /// pure-noise processes uncorrelated with everything else observed,
    /// and exact duplicates.
    fn informative(&self) -> Result<Vec<Observation>> {
        let mut kept: Vec<Observation> = self.obs.iter().copied().filter(|o| o.time > 0.0).collect();
        let present: Vec<usize> = {
            let mut p: Vec<usize> = kept.iter().map(|o| o.process).collect();
            p.sort_unstable();
            p.dedup();
            p
        };
        let pure_noise =
            |j: usize| self.specs[j].sigma() == 0.0 && present.iter().all(|&k| k == j || self.corr[j][k] == 0.0);
        kept.retain(|o| !pure_noise(o.process));
        let mut out: Vec<Observation> = Vec::with_capacity(kept.len());
        for o in kept {
            let duplicate = out.iter().find(|p| {
                p.time == o.time
                    && self.corr[p.process][o.process] == 1.0
                    && self.specs[p.process].sigma() == self.specs[o.process].sigma()
            });
            match duplicate {
                Some(p) if (p.value - o.value).abs() <= 1e-12 * (1.0 + p.value.abs()) => {}
                Some(p) => {
                    return Err(Error::Inconsistent(format!(
                        "perfectly correlated observations at t={} disagree: {} vs {}",
                        o.time, p.value, o.value
                    )))
                }
                None => out.push(o),
            }
        }
        Ok(out)
    }

    /// Pooled evidence `(a, b) = (sᵀΣ⁻¹y, sᵀΣ⁻¹s)` with `s_a = σ_a t_a`.
    pub fn evidence(&self) -> Result<Evidence> {
        let obs = self.informative()?;
        self.evidence_of(&obs)
    }

    fn evidence_of(&self, obs: &[Observation]) -> Result<Evidence> {
        match obs {
            [] => Ok(Evidence::NONE),
            [o] => Ok(Evidence::single(&self.specs[o.process], o.time, o.value)),
            _ => {
                let m = obs.len();
                let mut sigma = vec![vec![0.0; m]; m];
                for i in 0..m {
                    for j in 0..=i {
                        let c = self.noise_covariance(&obs[i], &obs[j]);
                        sigma[i][j] = c;
                        sigma[j][i] = c;
                    }
                }
                let l = cholesky(&sigma)?;
                let s: Vec<f64> = obs.iter().map(|o| self.specs[o.process].sigma() * o.time).collect();
                let y: Vec<f64> = obs.iter().map(|o| o.value).collect();
                let zs = forward_solve(&l, &s);
                let zy = forward_solve(&l, &y);
                Ok(Evidence {
                    a: zs.iter().zip(&zy).map(|(p, q)| p * q).sum(),
                    b: zs.iter().map(|p| p * p).sum(),
                })
            }
        }
    }
}

fn cholesky(a: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let dot: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = a[i][i] - dot;
                if !(d > 1e-12 * a[i][i]) {
                    return Err(Error::DegenerateObservation(format!(
                        "observation covariance is singular (pivot {d:e} at row {i})"
                    )));
                }
                l[i][i] = d.sqrt();
            } else {
                l[i][j] = (a[i][j] - dot) / l[j][j];
            }
        }
    }
    Ok(l)
}

fn forward_solve(l: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let mut z = vec![0.0; b.len()];
    for i in 0..b.len() {
        let dot: f64 = (0..i).map(|k| l[i][k] * z[k]).sum();
        z[i] = (b[i] - dot) / l[i][i];
    }
    z
}

/// Cholesky that tolerates zero pivots.
fn is_positive_semidefinite(a: &[Vec<f64>]) -> bool {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let dot: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = a[i][i] - dot;
                if d < -1e-12 {
                    return false;
                }
                l[i][i] = d.max(0.0).sqrt();
            } else if l[j][j] > 1e-12 {
                l[i][j] = (a[i][j] - dot) / l[j][j];
            } else if (a[i][j] - dot).abs() > 1e-9 {
                return false;
            }
        }
    }
    true
}

/// The law of `X` given every observation in `set`.
///
/// A lone informative observation is handled exactly as by
/// [`posterior_single`].
pub fn posterior_multi_signal(prior: &FactorPrior, set: &ObservationSet) -> Result<PosteriorState> {
    let t = set.observations().iter().map(|o| o.time).fold(0.0, f64::max);
    for o in set.observations() {
        check_time(&set.specs()[o.process], o.time)?;
    }
    let obs = set.informative()?;
    if let [o] = obs.as_slice() {
        let mut state = posterior_single(prior, &set.specs()[o.process], o.time, o.value)?;
        state.t = t;
        return Ok(state);
    }
    PosteriorState::from_evidence(prior, t, set.evidence_of(&obs)?)
}

/// Posterior mean and variance.
pub fn conditional_moments(state: &PosteriorState) -> Result<(f64, f64)> {
    match &state.repr {
        Repr::Discrete { outcomes, weights } => {
            let mean = state.mean()?;
            let var: f64 = outcomes
                .iter()
                .zip(weights)
                .map(|(d, w)| w * (d - mean) * (d - mean))
                .sum();
            Ok((mean, var.max(0.0)))
        }
        Repr::Continuous(c) => {
            let mean = state.mean()?;
            let c_scale = c.scale;
            let var = integrate_with_breaks(
                |x| (x - mean) * (x - mean) * state.density(x),
                c.support,
                &c.breaks,
                1e-12 * c_scale * c_scale,
            )?;
            Ok((mean, var.max(0.0)))
        }
    }
}

/// `S_t = P_tT E_t[X]` for an asset paying `X` at `T`.
pub fn price_single_dividend(
    prior: &FactorPrior,
    spec: &InfoProcessSpec,
    curve: &DiscountCurve,
    t: f64,
    xi: f64,
) -> Result<f64> {
    let state = posterior_single(prior, spec, t, xi)?;
    Ok(curve.discount(t, spec.horizon())? * state.mean()?)
}

/// `S_t = P_tT E_t[payoff(X)]` for an asset paying `payoff(X)` at `T`.
pub fn price_single_payoff<F: Fn(f64) -> f64>(
    prior: &FactorPrior,
    spec: &InfoProcessSpec,
    curve: &DiscountCurve,
    t: f64,
    xi: f64,
    payoff: F,
) -> Result<f64> {
    let state = posterior_single(prior, spec, t, xi)?;
    Ok(curve.discount(t, spec.horizon())? * state.expect(payoff)?)
}

/// Per-factor posteriors at time `t`. Factors whose date has passed are
/// revealed from their terminal values.
pub fn factor_posteriors(asset: &AssetSpec, t: f64, xi: &[f64]) -> Result<Vec<PosteriorState>> {
    if xi.len() != asset.factor_count() {
        return domain_err(format!(
            "missing observation: {} factors but {} values",
            asset.factor_count(),
            xi.len()
        ));
    }
    asset
        .priors()
        .iter()
        .zip(asset.info_specs())
        .zip(xi)
        .map(|((prior, spec), &v)| {
            if spec.horizon() <= t {
                reveal_at_horizon(prior, spec, v)
            } else {
                posterior_single(prior, spec, t, v)
            }
        })
        .collect()
}

/// `E[f(X_1, …, X_n)]` under independent per-factor posteriors: exact
/// enumeration over discrete factors, nested quadrature over continuous ones.
pub fn expect_product<F: Fn(&[f64]) -> f64>(posteriors: &[PosteriorState], f: F) -> Result<f64> {
    let mut x = Vec::with_capacity(posteriors.len());
    expect_rec(posteriors, &f, &mut x)
}

fn expect_rec(posteriors: &[PosteriorState], f: &dyn Fn(&[f64]) -> f64, x: &mut Vec<f64>) -> Result<f64> {
    let Some((head, tail)) = posteriors.split_first() else {
        return Ok(f(x));
    };
    if let Some((outcomes, weights)) = head.atoms() {
        let mut total = 0.0;
        for (&d, &w) in outcomes.iter().zip(weights) {
            x.push(d);
            let v = expect_rec(tail, f, x);
            x.pop();
            total += w * v?;
        }
        return Ok(total);
    }
    let failure = RefCell::new(None);
    let prefix = RefCell::new(x.clone());
    let inner = |v: f64| {
        let mut buf = prefix.borrow_mut();
        buf.push(v);
        let r = expect_rec(tail, f, &mut buf);
        buf.pop();
        match r {
            Ok(val) => val,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                0.0
            }
        }
    };
    let total = head.expect(inner)?;
    match failure.into_inner() {
        Some(e) => Err(e),
        None => Ok(total),
    }
}

/// Price of a multi-dividend asset from per-factor posteriors.
pub fn price_with_posteriors(
    asset: &AssetSpec,
    curve: &DiscountCurve,
    t: f64,
    posteriors: &[PosteriorState],
) -> Result<f64> {
    let mut total = 0.0;
    for (k, &date) in asset.dates().iter().enumerate() {
        if date <= t {
            continue;
        }
        let cf = asset.cashflows();
        let e = expect_product(&posteriors[..=k], |x| cf.flow(k, x))?;
        total += curve.discount(t, date)? * e;
    }
    Ok(total)
}

/// `S_t = Σ_{k: T_k > t} P_tT_k E_t[Δ_T_k]`, given one information value per
/// factor (the terminal value for factors already revealed).
pub fn price_multi_dividend(asset: &AssetSpec, curve: &DiscountCurve, t: f64, xi: &[f64]) -> Result<f64> {
    if asset.dates().iter().all(|&d| d <= t) {
        return Ok(0.0);
    }
    let posteriors = factor_posteriors(asset, t, xi)?;
    price_with_posteriors(asset, curve, t, &posteriors)
}
