//! How much an information process, or a price built from it, tells about
//! a discrete cash flow.
//!
//! Given `D_T = d_i`, `ξ_t` is normal with mean `σtd_i` and variance
//! `v = t(T−t)/T`. Mutual information is invariant under the affine map
//! `z = ξ/√v`, so all integrals are done in standardized coordinates, where
//! every component has unit variance and the means `σ√τ d_i`,
//! `τ = tT/(T−t)`, move apart as `t → T`.

use rayon::prelude::*;

use crate::error::{domain_err, Error, Result};
use crate::filtering::price_single_dividend;
use crate::market::{DiscountCurve, FactorPrior};
use crate::numerics::{
    graded_breaks, integrate_with_breaks, ln_normal_pdf, log_sum_exp, std_normal_cdf, std_normal_quantile_tail,
    Interval,
};
use crate::stochastic::{lanes, std_normal_sample, substream, InfoProcessSpec};

/// Half-width, in standard deviations, of the box kept around each
/// component.
pub const BOX_HALF_WIDTH: f64 = 8.0;

/// Absolute tolerance of the one-dimensional information integrals.
const TOL_1D: f64 = 1e-13;
/// Absolute tolerance of each inner integral in two dimensions.
const TOL_2D_INNER: f64 = 1e-13;
const TOL_2D_OUTER: f64 = 1e-12;

/// Below this `1 − ρ²` two noises are treated as one.
const SINGULAR_CORRELATION: f64 = 1e-12;

fn discrete_parts(prior: &FactorPrior) -> Result<(&[f64], &[f64])> {
    prior
        .atoms()
        .ok_or_else(|| Error::Domain("mutual information needs a discrete prior".into()))
}

fn shannon_entropy(probs: &[f64]) -> f64 {
    -probs.iter().filter(|&&p| p > 0.0).map(|p| p * p.ln()).sum::<f64>()
}

/// Per-outcome densities of `ξ_t` on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDensityGrid {
    probs: Vec<f64>,
    means: Vec<f64>,
    variance: f64,
    xi: Vec<f64>,
    joint: Vec<Vec<f64>>,
}

impl JointDensityGrid {
    /// The grid points, covering every component up to a tail mass of 1e-12.
    pub fn xi(&self) -> &[f64] {
        &self.xi
    }

    /// `ρ(ξ_k, i)` for each grid point `ξ_k`.
    pub fn joint(&self, i: usize) -> &[f64] {
        &self.joint[i]
    }

    /// `ρ(ξ_k) = Σ_i ρ(ξ_k, i)`.
    pub fn marginal(&self) -> Vec<f64> {
        (0..self.xi.len())
            .map(|k| self.joint.iter().map(|row| row[k]).sum())
            .collect()
    }

    /// Conditional means `σtd_i`.
    pub fn means(&self) -> &[f64] {
        &self.means
    }

    /// Common conditional variance `t(T−t)/T`.
    pub fn variance(&self) -> f64 {
        self.variance
    }

    /// `ρ(ξ, i)` at an arbitrary point.
    pub fn density(&self, xi: f64, i: usize) -> f64 {
        self.probs[i] * ln_normal_pdf(xi, self.means[i], self.variance).exp()
    }

    /// `ρ(i) = ∫ ρ(ξ, i) dξ`, by quadrature.
    pub fn outcome_mass(&self, i: usize) -> Result<f64> {
        let sd = self.variance.sqrt();
        let mean = self.means[i];
        let domain = Interval::new(mean - 2.0 * BOX_HALF_WIDTH * sd, mean + 2.0 * BOX_HALF_WIDTH * sd)?;
        let breaks = graded_breaks(mean, sd, domain);
        integrate_with_breaks(|x| self.density(x, i), domain, &breaks, 1e-15)
    }
}

/// `ρ(ξ, i) = p_i N(ξ; σtd_i, t(T−t)/T)` sampled at `points_per_sd` points
/// per standard deviation.
pub fn joint_density(
    prior: &FactorPrior,
    spec: &InfoProcessSpec,
    t: f64,
    points_per_sd: usize,
) -> Result<JointDensityGrid> {
    let (outcomes, probs) = discrete_parts(prior)?;
    let horizon = spec.horizon();
    if !(t > 0.0 && t < horizon) {
        return domain_err(format!("joint density needs 0 < t < {horizon}, got {t}"));
    }
    if points_per_sd == 0 {
        return domain_err("need at least one point per standard deviation");
    }
    let variance = spec.bridge_variance(t);
    let sd = variance.sqrt();
    let means: Vec<f64> = outcomes.iter().map(|&d| spec.sigma() * t * d).collect();
    let reach = std_normal_quantile_tail(1e-12)? * sd;
    let lo = means.iter().copied().fold(f64::INFINITY, f64::min) - reach;
    let hi = means.iter().copied().fold(f64::NEG_INFINITY, f64::max) + reach;
    let n = ((hi - lo) / sd * points_per_sd as f64).ceil() as usize + 1;
    let xi: Vec<f64> = (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect();
    let joint = probs
        .iter()
        .zip(&means)
        .map(|(&p, &m)| xi.iter().map(|&x| p * ln_normal_pdf(x, m, variance).exp()).collect())
        .collect();
    Ok(JointDensityGrid {
        probs: probs.to_vec(),
        means,
        variance,
        xi,
        joint,
    })
}

/// Mutual information (nats) of a unit-variance Gaussian location mixture
/// with weights `probs` and means `means`.
fn mixture_information_1d(probs: &[f64], means: &[f64]) -> Result<f64> {
    let lo = means.iter().copied().fold(f64::INFINITY, f64::min) - BOX_HALF_WIDTH;
    let hi = means.iter().copied().fold(f64::NEG_INFINITY, f64::max) + BOX_HALF_WIDTH;
    if hi - lo <= 2.0 * BOX_HALF_WIDTH {
        return Ok(0.0);
    }
    let domain = Interval::new(lo, hi)?;
    let mut breaks = Vec::new();
    for &m in means {
        breaks.extend(graded_breaks(m, 1.0, domain));
    }
    let ln_p: Vec<f64> = probs.iter().map(|p| p.ln()).collect();
    let mut total = 0.0;
    for (i, &m_i) in means.iter().enumerate() {
        if probs[i] == 0.0 {
            continue;
        }
        let component = Interval::new(m_i - BOX_HALF_WIDTH, m_i + BOX_HALF_WIDTH)?;
        let integrand = |z: f64| {
            let terms: Vec<f64> = means
                .iter()
                .zip(&ln_p)
                .map(|(&m, &lp)| lp - 0.5 * (z - m) * (z - m))
                .collect();
            let ln_ratio = -0.5 * (z - m_i) * (z - m_i) - log_sum_exp(&terms);
            probs[i] * crate::numerics::normal_pdf(z - m_i) * ln_ratio
        };
        total += integrate_with_breaks(integrand, component, &breaks, TOL_1D)?;
    }
    Ok(total.max(0.0))
}

/// `J(ξ_t; D_T)` in nats.
///
/// `J(0) = 0` and `J(T)` is the entropy of the prior.
pub fn mutual_information(prior: &FactorPrior, spec: &InfoProcessSpec, t: f64) -> Result<f64> {
    let (outcomes, probs) = discrete_parts(prior)?;
    let horizon = spec.horizon();
    if !(t >= 0.0 && t <= horizon) {
        return domain_err(format!("time must lie in [0, {horizon}], got {t}"));
    }
    if t == 0.0 || spec.sigma() == 0.0 {
        return Ok(0.0);
    }
    if t == horizon {
        return Ok(shannon_entropy(probs));
    }
    let tau = t * horizon / (horizon - t);
    let scale = spec.sigma() * tau.sqrt();
    let means: Vec<f64> = outcomes.iter().map(|&d| scale * d).collect();
    mixture_information_1d(probs, &means)
}

/// Mutual information of a two-dimensional unit-covariance Gaussian mixture,
/// integrated over the union of per-component boxes.
fn mixture_information_2d(probs: &[f64], means: &[(f64, f64)]) -> Result<f64> {
    let bound = |f: fn(&(f64, f64)) -> f64, lo: bool| {
        means
            .iter()
            .map(f)
            .fold(if lo { f64::INFINITY } else { f64::NEG_INFINITY }, |a, b| {
                if lo {
                    a.min(b)
                } else {
                    a.max(b)
                }
            })
    };
    let x_dom = Interval::new(
        bound(|m| m.0, true) - BOX_HALF_WIDTH,
        bound(|m| m.0, false) + BOX_HALF_WIDTH,
    )?;
    let y_dom = Interval::new(
        bound(|m| m.1, true) - BOX_HALF_WIDTH,
        bound(|m| m.1, false) + BOX_HALF_WIDTH,
    )?;
    let mut x_breaks = Vec::new();
    let mut y_breaks = Vec::new();
    for &(mx, my) in means {
        x_breaks.extend(graded_breaks(mx, 1.0, x_dom));
        y_breaks.extend(graded_breaks(my, 1.0, y_dom));
    }
    let ln_p: Vec<f64> = probs.iter().map(|p| p.ln()).collect();
    let failure = std::cell::RefCell::new(None);
    let mut total = 0.0;
    for (i, &(mx, my)) in means.iter().enumerate() {
        if probs[i] == 0.0 {
            continue;
        }
        let x_box = Interval::new(mx - BOX_HALF_WIDTH, mx + BOX_HALF_WIDTH)?;
        let y_box = Interval::new(my - BOX_HALF_WIDTH, my + BOX_HALF_WIDTH)?;
        let inner = |x: f64| {
            let dx_i = x - mx;
            let f = |y: f64| {
                let terms: Vec<f64> = means
                    .iter()
                    .zip(&ln_p)
                    .map(|(&(ax, ay), &lp)| lp - 0.5 * ((x - ax).powi(2) + (y - ay).powi(2)))
                    .collect();
                let own = -0.5 * (dx_i * dx_i + (y - my).powi(2));
                probs[i] * own.exp() / std::f64::consts::TAU * (own - log_sum_exp(&terms))
            };
            match integrate_with_breaks(f, y_box, &y_breaks, TOL_2D_INNER) {
                Ok(v) => v,
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    0.0
                }
            }
        };
        total += integrate_with_breaks(inner, x_box, &x_breaks, TOL_2D_OUTER)?;
        if let Some(e) = failure.borrow_mut().take() {
            return Err(e);
        }
    }
    Ok(total.max(0.0))
}

/// `J((ξ_t, ξ'_t); D_T)` for two processes on the same cash flow whose bridge
/// noises have correlation `rho`.
pub fn joint_mutual_information(
    prior: &FactorPrior,
    spec: &InfoProcessSpec,
    extra: &InfoProcessSpec,
    rho: f64,
    t: f64,
) -> Result<f64> {
    let (outcomes, probs) = discrete_parts(prior)?;
    let horizon = spec.horizon();
    if extra.horizon() != horizon {
        return domain_err("both processes must share the horizon");
    }
    if !(-1.0..=1.0).contains(&rho) {
        return domain_err(format!("correlation must lie in [-1, 1], got {rho}"));
    }
    if !(t >= 0.0 && t <= horizon) {
        return domain_err(format!("time must lie in [0, {horizon}], got {t}"));
    }
    if t == 0.0 || (spec.sigma() == 0.0 && extra.sigma() == 0.0) {
        return Ok(0.0);
    }
    if t == horizon {
        return Ok(shannon_entropy(probs));
    }
    let (s1, s2) = (spec.sigma(), extra.sigma());
    let residual = 1.0 - rho * rho;
    if residual < SINGULAR_CORRELATION {
        // ξ' − ρξ carries no noise: it either reveals D or repeats ξ.
        let clean = s2 - rho.signum() * s1;
        if clean.abs() > 1e-12 * (s1.abs() + s2.abs()) {
            return Ok(shannon_entropy(probs));
        }
        return mutual_information(prior, spec, t);
    }
    // Whitening by the Cholesky factor of [[1, ρ], [ρ, 1]].
    let root_tau = (t * horizon / (horizon - t)).sqrt();
    let direction = (s1, (s2 - rho * s1) / residual.sqrt());
    let means: Vec<(f64, f64)> = outcomes
        .iter()
        .map(|&d| (root_tau * direction.0 * d, root_tau * direction.1 * d))
        .collect();
    mixture_information_2d(probs, &means)
}

/// `ΔJ = J((ξ, ξ'); D) − J(ξ; D)`, the information an informed trader holds
/// beyond the market's.
pub fn informed_information_gain(
    prior: &FactorPrior,
    spec: &InfoProcessSpec,
    extra: &InfoProcessSpec,
    rho: f64,
    t: f64,
) -> Result<f64> {
    Ok(joint_mutual_information(prior, spec, extra, rho, t)? - mutual_information(prior, spec, t)?)
}

/// Quadrature and plug-in estimates of the information in `ξ_t` and in
/// `S_t` respectively.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceInformationCheck {
    /// `J(ξ_t; D_T)` by quadrature.
    pub j_signal: f64,
    /// Plug-in `J(S_t; D_T)` from equal-count bins, with the Miller–Madow
    /// bias correction.
    pub j_price: f64,
    /// Standard error of `j_price`.
    pub standard_error: f64,
    /// `J(ξ_t; D_T)` minus the exact information left after binning at the
    /// same edges. Nonnegative.
    pub binning_loss: f64,
}

impl PriceInformationCheck {
    /// Whether the two estimates agree within binning loss plus 3 SE.
    pub fn agrees(&self) -> bool {
        (self.j_price - self.j_signal).abs() <= self.binning_loss + 3.0 * self.standard_error + 1e-12
    }
}

/// Compares `J(ξ_t; D_T)` with a plug-in estimate of `J(S_t; D_T)` from
/// `n_samples` draws binned into `n_bins` equal-count bins of `S_t`.
pub fn price_information_equality_check(
    prior: &FactorPrior,
    spec: &InfoProcessSpec,
    t: f64,
    n_bins: usize,
    n_samples: usize,
    seed: u64,
) -> Result<PriceInformationCheck> {
    let (outcomes, probs) = discrete_parts(prior)?;
    if n_bins == 0 || n_samples < 2 * n_bins {
        return domain_err("need at least one bin and two samples per bin");
    }
    let j_signal = mutual_information(prior, spec, t)?;
    let curve = DiscountCurve::zero();
    let sd = spec.bridge_variance(t).sqrt();

    // (S_t, ξ_t, outcome index) per draw.
    let draws: Result<Vec<(f64, f64, usize)>> = (0..n_samples as u64)
        .into_par_iter()
        .map(|k| {
            let x = prior.sample(&mut substream(seed, lanes::FACTOR, k));
            let i = outcomes.iter().position(|&d| d == x).expect("draw is an atom");
            let xi = spec.sigma() * t * x + sd * std_normal_sample(&mut substream(seed, lanes::BRIDGE, k));
            let s = if t < spec.horizon() {
                price_single_dividend(prior, spec, &curve, t, xi)?
            } else {
                x
            };
            Ok((s, xi, i))
        })
        .collect();
    let mut draws = draws?;
    draws.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));

    // Equal-count bins whose edges never split equal prices.
    let mut bin_of = vec![0usize; n_samples];
    let mut edges_xi = Vec::new();
    let target = n_samples as f64 / n_bins as f64;
    let mut bin = 0usize;
    for k in 1..n_samples {
        let want = ((k as f64) / target).floor() as usize;
        if want > bin && draws[k].0 > draws[k - 1].0 {
            bin += 1;
            edges_xi.push(0.5 * (draws[k].1 + draws[k - 1].1));
        }
        bin_of[k] = bin;
    }
    let n_used = bin + 1;
    let m = outcomes.len();
    let mut counts = vec![vec![0usize; m]; n_used];
    for (k, &(_, _, i)) in draws.iter().enumerate() {
        counts[bin_of[k]][i] += 1;
    }
    let n = n_samples as f64;
    let row: Vec<f64> = counts.iter().map(|c| c.iter().sum::<usize>() as f64).collect();
    let col: Vec<f64> = (0..m)
        .map(|i| counts.iter().map(|c| c[i]).sum::<usize>() as f64)
        .collect();
    let mut plug_in = 0.0;
    let mut second = 0.0;
    let mut occupied = 0usize;
    for (b, c) in counts.iter().enumerate() {
        for (i, &nbi) in c.iter().enumerate() {
            if nbi == 0 {
                continue;
            }
            occupied += 1;
            let q = nbi as f64 / n;
            let l = (nbi as f64 * n / (row[b] * col[i])).ln();
            plug_in += q * l;
            second += q * l * l;
        }
    }
    let nonempty_rows = row.iter().filter(|&&r| r > 0.0).count();
    let nonempty_cols = col.iter().filter(|&&c| c > 0.0).count();
    // Miller–Madow: the plug-in overestimates by (cells − rows − cols + 1)/(2N).
    let correction = (occupied as f64 - nonempty_rows as f64 - nonempty_cols as f64 + 1.0) / (2.0 * n);
    let j_price = plug_in - correction;
    let standard_error = ((second - plug_in * plug_in).max(0.0) / n).sqrt();

    // Exact information of the binned signal at the same edges.
    let binning_loss = if sd > 0.0 && t > 0.0 && t < spec.horizon() && !edges_xi.is_empty() {
        let mut bounds = vec![f64::NEG_INFINITY];
        bounds.extend(&edges_xi);
        bounds.push(f64::INFINITY);
        let mut exact = 0.0;
        for w in bounds.windows(2) {
            let cell: Vec<f64> = outcomes
                .iter()
                .zip(probs)
                .map(|(&d, &p)| {
                    let mu = spec.sigma() * t * d;
                    p * (std_normal_cdf((w[1] - mu) / sd) - std_normal_cdf((w[0] - mu) / sd))
                })
                .collect();
            let total: f64 = cell.iter().sum();
            for (q, &p) in cell.iter().zip(probs) {
                if *q > 0.0 {
                    exact += q * (q / (total * p)).ln();
                }
            }
        }
        (j_signal - exact).max(0.0)
    } else {
        j_signal
    };
    Ok(PriceInformationCheck {
        j_signal,
        j_price,
        standard_error,
        binning_loss,
    })
}
