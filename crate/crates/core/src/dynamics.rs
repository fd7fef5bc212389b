//! Price-process structure: the innovation Brownian motion, SDE
//! coefficients, multi-factor volatility loadings and dynamic correlation,
//! plus path simulation of whole assets.

use std::io::{self, Write};

use rand::Rng;
use rayon::prelude::*;

use crate::error::{domain_err, Error, Result};
use crate::filtering::{
    conditional_moments, expect_product, factor_posteriors, posterior_single, price_with_posteriors, PosteriorState,
    HORIZON_GUARD,
};
use crate::market::{AssetSpec, DiscountCurve, FactorPrior};
use crate::stochastic::{bridge_path, lanes, std_normal_sample, substream, InfoProcessSpec, TimeGrid};

/// The innovation process `W_t = ξ_t − ∫₀ᵗ (σT E_s[X] − ξ_s)/(T − s) ds` on
/// the leading part of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct InnovationPath {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl InnovationPath {
    /// `Σ (ΔW)²` over grid steps ending at or before `t`.
    pub fn quadratic_variation(&self, t: f64) -> f64 {
        self.times
            .windows(2)
            .zip(self.values.windows(2))
            .take_while(|(s, _)| s[1] <= t)
            .map(|(_, w)| (w[1] - w[0]).powi(2))
            .sum()
    }
}

/// Innovation path of one sampled information path `xi` on `grid`, up to the
/// last grid time not after `t_stop`. The compensator is integrated by the
/// trapezoid rule.
pub fn innovation_from_path(
    xi: &[f64],
    grid: &TimeGrid,
    prior: &FactorPrior,
    spec: &InfoProcessSpec,
    t_stop: f64,
) -> Result<InnovationPath> {
    let horizon = spec.horizon();
    if xi.len() != grid.len() {
        return domain_err(format!("path has {} values for {} grid points", xi.len(), grid.len()));
    }
    if t_stop >= horizon * (1.0 - HORIZON_GUARD) {
        return Err(Error::Horizon { t: t_stop, horizon });
    }
    let scale = spec.sigma() * horizon;
    let drift = |s: f64, x: f64| -> Result<f64> {
        let m = conditional_moments(&posterior_single(prior, spec, s, x)?)?.0;
        Ok((scale * m - x) / (horizon - s))
    };
    let pts = grid.points();
    let mut times = vec![pts[0]];
    let mut values = vec![xi[0]];
    let mut compensator = 0.0;
    let mut g_prev = drift(pts[0], xi[0])?;
    for k in 1..pts.len() {
        if pts[k] > t_stop {
            break;
        }
        let g = drift(pts[k], xi[k])?;
        compensator += 0.5 * (g_prev + g) * (pts[k] - pts[k - 1]);
        g_prev = g;
        times.push(pts[k]);
        values.push(xi[k] - compensator);
    }
    Ok(InnovationPath { times, values })
}

/// Drift `r_t S_t` and diffusion `P_tT (σT/(T − t)) Var_t[X]` of the price
/// of a single-dividend asset paying `X` at `T`.
pub fn sde_coefficients_single(
    prior: &FactorPrior,
    spec: &InfoProcessSpec,
    curve: &DiscountCurve,
    t: f64,
    xi: f64,
) -> Result<(f64, f64)> {
    let horizon = spec.horizon();
    let (m, v) = conditional_moments(&posterior_single(prior, spec, t, xi)?)?;
    let p = curve.discount(t, horizon)?;
    let s = p * m;
    Ok((curve.short_rate(t) * s, p * spec.sigma() * horizon / (horizon - t) * v))
}

/// Loadings of an asset's price on the innovation processes of its factors.
#[derive(Debug, Clone, PartialEq)]
pub struct VolCoefficients {
    /// Coefficient of `dW^j` for each factor `j`; zero once a factor is revealed.
    pub loadings: Vec<f64>,
    /// `P_tT_k` for each payment date still ahead (zero for paid flows).
    pub discounts: Vec<f64>,
}

impl VolCoefficients {
    pub fn total_volatility(&self) -> f64 {
        self.loadings.iter().map(|l| l * l).sum::<f64>().sqrt()
    }
}

/// `Σ_k 1{t<T_k} P_tT_k (σ_j T_j/(T_j − t)) Cov_t[Δ_T_k, X_j]` for each
/// factor `j`, under the product of per-factor posteriors.
pub fn vol_coefficients_multi(
    asset: &AssetSpec,
    curve: &DiscountCurve,
    t: f64,
    posteriors: &[PosteriorState],
) -> Result<VolCoefficients> {
    let n = asset.factor_count();
    if posteriors.len() != n {
        return domain_err(format!("{n} factors but {} posteriors", posteriors.len()));
    }
    let dates = asset.dates();
    let cf = asset.cashflows();
    let discounts: Vec<f64> = dates
        .iter()
        .map(|&d| if d > t { curve.discount(t, d) } else { Ok(0.0) })
        .collect::<Result<_>>()?;
    let means: Vec<f64> = posteriors.iter().map(|p| p.mean()).collect::<Result<_>>()?;
    let mut loadings = vec![0.0; n];
    for (j, spec) in asset.info_specs().iter().enumerate() {
        let horizon = spec.horizon();
        if horizon * (1.0 - HORIZON_GUARD) <= t || posteriors[j].is_point_mass() {
            continue;
        }
        let rate = spec.sigma() * horizon / (horizon - t);
        let mut total = 0.0;
        for k in j..dates.len() {
            if dates[k] <= t {
                continue;
            }
            let cov = expect_product(&posteriors[..=k], |x| cf.flow(k, x) * (x[j] - means[j]))?;
            total += discounts[k] * cov;
        }
        loadings[j] = rate * total;
    }
    Ok(VolCoefficients { loadings, discounts })
}

/// Instantaneous correlation of two price processes: the normalized inner
/// product of their loading vectors (shorter vectors are padded with zeros).
pub fn instantaneous_correlation(first: &VolCoefficients, second: &VolCoefficients) -> Result<f64> {
    let n = first.loadings.len().max(second.loadings.len());
    let get = |v: &[f64], i: usize| v.get(i).copied().unwrap_or(0.0);
    let dot: f64 = (0..n).map(|i| get(&first.loadings, i) * get(&second.loadings, i)).sum();
    let (a, b) = (first.total_volatility(), second.total_volatility());
    if a == 0.0 || b == 0.0 {
        return Err(Error::UndefinedCorrelation);
    }
    Ok((dot / (a * b)).clamp(-1.0, 1.0))
}

/// `S_0 exp(rt + νξ − ν²t/2)`.
pub fn gbm_price(s0: f64, r: f64, nu: f64, horizon: f64, t: f64, xi: f64) -> Result<f64> {
    if !(t >= 0.0 && t <= horizon) {
        return domain_err(format!("need 0 ≤ t ≤ T, got t={t}, T={horizon}"));
    }
    Ok(s0 * (r * t + nu * xi - 0.5 * nu * nu * t).exp())
}

/// Draws `ξ_{t+dt}` given `ξ_t = xi` under the pricing measure: a factor
/// value from the time-`t` posterior, then the exact bridge transition.
pub fn sample_next_information<R: Rng + ?Sized>(
    prior: &FactorPrior,
    spec: &InfoProcessSpec,
    t: f64,
    xi: f64,
    dt: f64,
    rng: &mut R,
) -> Result<f64> {
    let horizon = spec.horizon();
    if !(dt > 0.0 && t + dt <= horizon) {
        return domain_err(format!("step {dt} from t={t} leaves [0, {horizon}]"));
    }
    let post = posterior_single(prior, spec, t, xi)?;
    let Some((outcomes, weights)) = post.atoms() else {
        return domain_err("conditional stepping needs a discrete prior");
    };
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut x = outcomes[outcomes.len() - 1];
    for (&d, &w) in outcomes.iter().zip(weights) {
        acc += w;
        if u < acc {
            x = d;
            break;
        }
    }
    let sigma = spec.sigma();
    let beta = xi - sigma * t * x;
    let s = t + dt;
    let beta_next = if s >= horizon {
        0.0
    } else {
        let rem = horizon - t;
        beta * (horizon - s) / rem + (dt * (horizon - s) / rem).sqrt() * std_normal_sample(rng)
    };
    Ok(sigma * s * x + beta_next)
}

/// Lane of the bridge noise of factor `j`.
pub fn factor_bridge_lane(j: usize) -> u64 {
    lanes::BRIDGE + ((j as u64) << 16)
}

/// Lane of the factor draw of factor `j`.
pub fn factor_draw_lane(j: usize) -> u64 {
    lanes::FACTOR + ((j as u64) << 16)
}

/// Simulated paths of one asset: factor draws, information processes, prices
/// and innovations.
#[derive(Debug, Clone, PartialEq)]
pub struct AssetSimulation {
    pub grid: TimeGrid,
    /// `factors[path][j]`.
    pub factors: Vec<Vec<f64>>,
    /// `information[path][j][k]`: `ξ^j` at grid time `k`, held at its
    /// terminal value after `T_j`.
    pub information: Vec<Vec<Vec<f64>>>,
    /// `prices[path][k]`, ex-dividend at each payment date.
    pub prices: Vec<Vec<f64>>,
    /// `innovations[path][j][k]`, held at its last value from the final grid
    /// time before `T_j`.
    pub innovations: Vec<Vec<Vec<f64>>>,
}

impl AssetSimulation {
    /// Long format: `time,path,price,W_0,…`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let m = self.factors.first().map_or(0, Vec::len);
        write!(out, "time,path,price")?;
        for j in 0..m {
            write!(out, ",W_{j}")?;
        }
        writeln!(out)?;
        for (p, prices) in self.prices.iter().enumerate() {
            for (k, t) in self.grid.points().iter().enumerate() {
                write!(out, "{t},{p},{}", prices[k])?;
                for j in 0..m {
                    write!(out, ",{}", self.innovations[p][j][k])?;
                }
                writeln!(out)?;
            }
        }
        Ok(())
    }
}

/// Simulates `n_paths` joint paths of every factor's information process on
/// `grid` (which must contain each payment date) and prices the asset along
/// them.
pub fn simulate_asset(
    asset: &AssetSpec,
    curve: &DiscountCurve,
    grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
) -> Result<AssetSimulation> {
    if n_paths == 0 {
        return domain_err("need at least one path");
    }
    let dates = asset.dates();
    if grid.horizon() < dates[dates.len() - 1] {
        return domain_err("grid ends before the last payment date");
    }
    let date_index: Vec<usize> = dates
        .iter()
        .map(|&d| {
            grid.index_of(d)
                .ok_or_else(|| Error::Domain(format!("payment date {d} is not a grid point")))
        })
        .collect::<Result<_>>()?;
    let sub_grids: Vec<TimeGrid> = date_index
        .iter()
        .map(|&k| TimeGrid::new(grid.points()[..=k].to_vec()))
        .collect::<Result<_>>()?;

    let per_path: Vec<Result<(Vec<f64>, Vec<Vec<f64>>, Vec<f64>, Vec<Vec<f64>>)>> = (0..n_paths)
        .into_par_iter()
        .map(|i| simulate_one(asset, curve, grid, &date_index, &sub_grids, seed, i))
        .collect();
    let mut sim = AssetSimulation {
        grid: grid.clone(),
        factors: Vec::with_capacity(n_paths),
        information: Vec::with_capacity(n_paths),
        prices: Vec::with_capacity(n_paths),
        innovations: Vec::with_capacity(n_paths),
    };
    for r in per_path {
        let (x, info, prices, innov) = r?;
        sim.factors.push(x);
        sim.information.push(info);
        sim.prices.push(prices);
        sim.innovations.push(innov);
    }
    Ok(sim)
}

#[allow(clippy::type_complexity)]
fn simulate_one(
    asset: &AssetSpec,
    curve: &DiscountCurve,
    grid: &TimeGrid,
    date_index: &[usize],
    sub_grids: &[TimeGrid],
    seed: u64,
    path: usize,
) -> Result<(Vec<f64>, Vec<Vec<f64>>, Vec<f64>, Vec<Vec<f64>>)> {
    let n = grid.len();
    let mut factors = Vec::new();
    let mut info = Vec::new();
    let mut innov = Vec::new();
    for (j, (prior, spec)) in asset.priors().iter().zip(asset.info_specs()).enumerate() {
        let x = prior.sample(&mut substream(seed, factor_draw_lane(j), path as u64));
        let bridge = bridge_path(&sub_grids[j], &mut substream(seed, factor_bridge_lane(j), path as u64));
        let end = date_index[j];
        let mut xi = vec![0.0; n];
        for k in 0..n {
            let kk = k.min(end);
            xi[k] = spec.sigma() * grid.points()[kk] * x + if k < end { bridge[k] } else { 0.0 };
        }
        let stop = grid.points()[end.saturating_sub(1)];
        let w = innovation_from_path(&xi[..=end], &sub_grids[j], prior, spec, stop)?;
        let mut wfull = w.values.clone();
        let last = *wfull.last().expect("W_0 exists");
        wfull.resize(n, last);
        factors.push(x);
        info.push(xi);
        innov.push(wfull);
    }
    let mut prices = Vec::with_capacity(n);
    let mut xi_t = vec![0.0; factors.len()];
    for (k, &t) in grid.points().iter().enumerate() {
        for j in 0..factors.len() {
            xi_t[j] = info[j][k];
        }
        let price = if asset.dates().iter().all(|&d| d <= t) {
            0.0
        } else {
            let posts = factor_posteriors(asset, t, &xi_t)?;
            price_with_posteriors(asset, curve, t, &posts)?
        };
        prices.push(price);
    }
    Ok((factors, info, prices, innov))
}
