use infoprice::dynamics::{
    innovation_from_path, instantaneous_correlation, sample_next_information, sde_coefficients_single,
    vol_coefficients_multi,
};
use infoprice::filtering::{conditional_moments, factor_posteriors, posterior_single, price_with_posteriors};
use infoprice::market::{factory_restaurant, DiscountCurve, FactorPrior, RestaurantRecovery};
use infoprice::stochastic::{
    mean_and_stderr, sample_information_paths, std_normal_sample, substream, InfoProcessSpec, TimeGrid,
};
use proptest::prelude::*;
use rayon::prelude::*;

fn factor_draws(prior: &FactorPrior, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = substream(seed, 900, 0);
    (0..n).map(|_| prior.sample(&mut rng)).collect()
}

fn mean_qv(prior: &FactorPrior, spec: &InfoProcessSpec, n: usize, steps: usize, seed: u64) -> (f64, f64) {
    let horizon = spec.horizon();
    let grid = TimeGrid::uniform(horizon, steps).unwrap();
    let xi = sample_information_paths(spec, &factor_draws(prior, n, seed), &grid, seed).unwrap();
    let qv: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let w = innovation_from_path(xi.path(i), &grid, prior, spec, 0.9 * horizon + 1e-12).unwrap();
            w.quadratic_variation(0.9 * horizon + 1e-12)
        })
        .collect();
    mean_and_stderr(&qv)
}

#[test]
fn levy_quadratic_variation() {
    let spec = InfoProcessSpec::new(0.8, 1.0).unwrap();
    let (m, _) = mean_qv(&FactorPrior::digital(0.3).unwrap(), &spec, 10_000, 1000, 1);
    assert!((m / 0.9 - 1.0).abs() < 0.05, "{m}");
    // A point-mass prior leaves a deterministic transform of the bridge.
    let (m, _) = mean_qv(&FactorPrior::point_mass(0.7).unwrap(), &spec, 10_000, 1000, 2);
    assert!((m / 0.9 - 1.0).abs() < 0.05, "{m}");
}

#[test]
fn conditional_mean_increments_are_uncorrelated() {
    let prior = FactorPrior::discrete(vec![0.0, 1.0, 3.0], vec![0.5, 0.3, 0.2]).unwrap();
    let spec = InfoProcessSpec::new(0.5, 2.0).unwrap();
    let grid = TimeGrid::new(vec![0.0, 0.6, 1.4, 2.0]).unwrap();
    let n = 100_000;
    let xi = sample_information_paths(&spec, &factor_draws(&prior, n, 5), &grid, 5).unwrap();
    let m = |t: f64, x: f64| {
        conditional_moments(&posterior_single(&prior, &spec, t, x).unwrap())
            .unwrap()
            .0
    };
    let prod: Vec<f64> = (0..n)
        .map(|i| {
            let p = xi.path(i);
            let (m1, m2) = (m(0.6, p[1]), m(1.4, p[2]));
            (m2 - m1) * (m1 - prior.mean())
        })
        .collect();
    let (c, se) = mean_and_stderr(&prod);
    assert!(c.abs() < 3.0 * se, "{c} ± {se}");
}

#[test]
fn ito_residual_is_first_order() {
    let prior = FactorPrior::digital(0.4).unwrap();
    let spec = InfoProcessSpec::new(1.0, 1.0).unwrap();
    let curve = DiscountCurve::flat(0.05).unwrap();
    let steps = 10_000;
    let fine = TimeGrid::uniform(1.0, steps).unwrap();
    let coarse = TimeGrid::new(fine.points().iter().step_by(2).copied().collect()).unwrap();
    let xi = sample_information_paths(&spec, &factor_draws(&prior, 100, 9), &fine, 9).unwrap();
    let rms = |grid: &TimeGrid, stride: usize| -> f64 {
        let per_path: Vec<(f64, usize)> = (0..100)
            .into_par_iter()
            .map(|i| {
                let path: Vec<f64> = xi.path(i).iter().step_by(stride).copied().collect();
                let w = innovation_from_path(&path, grid, &prior, &spec, 0.5).unwrap();
                let mut sq = 0.0;
                for k in 1..w.times.len() {
                    let (t0, t1) = (w.times[k - 1], w.times[k]);
                    let s = |t: f64, x: f64| {
                        curve.discount(t, 1.0).unwrap()
                            * conditional_moments(&posterior_single(&prior, &spec, t, x).unwrap())
                                .unwrap()
                                .0
                    };
                    let (drift, diff) = sde_coefficients_single(&prior, &spec, &curve, t0, path[k - 1]).unwrap();
                    let e = s(t1, path[k])
                        - s(t0, path[k - 1])
                        - drift * (t1 - t0)
                        - diff * (w.values[k] - w.values[k - 1]);
                    sq += e * e;
                }
                (sq, w.times.len() - 1)
            })
            .collect();
        let (sq, count) = per_path.iter().fold((0.0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
        (sq / count as f64).sqrt()
    };
    let dt = 1.0 / steps as f64;
    let e_fine = rms(&fine, 1);
    let e_coarse = rms(&coarse, 2);
    assert!(e_fine < 10.0 * dt, "rms {e_fine} at dt {dt}");
    let ratio = e_coarse / e_fine;
    assert!((1.6..2.5).contains(&ratio), "ratio {ratio}");
}

#[test]
fn gaussian_density_dynamics() {
    // dp_t(x) = (√T x − ξ) p_t(x) dξ / (T − t). The residual must shrink at
    // least linearly in dt; with dξ = √dt exactly the Ito term cancels the
    // time derivative and it shrinks faster.
    let horizon: f64 = 2.0;
    let t = 0.7;
    let xi = 0.4;
    let p = |s: f64, v: f64, x: f64| {
        (horizon / (2.0 * std::f64::consts::PI * (horizon - s))).sqrt()
            * (-(horizon.sqrt() * x - v).powi(2) / (2.0 * (horizon - s))).exp()
    };
    let err = |dt: f64| {
        let dxi = dt.sqrt();
        (0..81)
            .map(|i| -3.0 + 0.075 * i as f64)
            .map(|x| {
                let lhs = p(t + dt, xi + dxi, x) - p(t, xi, x);
                let rhs = (horizon.sqrt() * x - xi) * p(t, xi, x) * dxi / (horizon - t);
                (lhs - rhs).powi(2)
            })
            .sum::<f64>()
            .sqrt()
    };
    let ratio = err(4e-4) / err(1e-4);
    assert!(ratio > 3.5, "{ratio}");
}

#[test]
fn orthogonal_decomposition() {
    let horizon: f64 = 3.0;
    let grid = TimeGrid::uniform(horizon, 30).unwrap();
    let spec = InfoProcessSpec::new(1.0 / horizon.sqrt(), horizon).unwrap();
    for path in 0..20u64 {
        let mut rng = substream(44, 901, path);
        let mut w = vec![0.0];
        for k in 1..grid.len() {
            let dt = grid.points()[k] - grid.points()[k - 1];
            w.push(w[k - 1] + dt.sqrt() * std_normal_sample(&mut rng));
        }
        let wt = *w.last().unwrap();
        let x = wt / horizon.sqrt();
        for (k, &t) in grid.points().iter().enumerate() {
            let bridge = w[k] - t / horizon * wt;
            let xi = spec.sigma() * t * x + bridge;
            assert!((xi - w[k]).abs() < 1e-12);
        }
    }
}

fn factory_preset() -> (infoprice::market::AssetSpec, infoprice::market::AssetSpec) {
    let rec = RestaurantRecovery { a: 0.2, b: 0.5, c: 0.1 };
    factory_restaurant(100.0, 60.0, 0.4, rec, 0.7, 0.6, (0.4, 0.3), 2.0, 4.0).unwrap()
}

#[test]
fn empirical_increment_correlation() {
    let (factory, restaurant) = factory_preset();
    let curve = DiscountCurve::flat(0.02).unwrap();
    let t = 1.0;
    let xi = [0.15, 0.2];
    let posts = factor_posteriors(&restaurant, t, &xi).unwrap();
    let rho = instantaneous_correlation(
        &vol_coefficients_multi(&factory, &curve, t, &posts[..1]).unwrap(),
        &vol_coefficients_multi(&restaurant, &curve, t, &posts).unwrap(),
    )
    .unwrap();
    let s1 = price_with_posteriors(&factory, &curve, t, &posts[..1]).unwrap();
    let s2 = price_with_posteriors(&restaurant, &curve, t, &posts).unwrap();
    let dt = 1e-6;
    let n = 10_000;
    let incs: Vec<(f64, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(77, 902, i as u64);
            let next: Vec<f64> = restaurant
                .priors()
                .iter()
                .zip(restaurant.info_specs())
                .zip(xi)
                .map(|((p, s), v)| sample_next_information(p, s, t, v, dt, &mut rng).unwrap())
                .collect();
            let post = factor_posteriors(&restaurant, t + dt, &next).unwrap();
            (
                price_with_posteriors(&factory, &curve, t + dt, &post[..1]).unwrap() - s1,
                price_with_posteriors(&restaurant, &curve, t + dt, &post).unwrap() - s2,
            )
        })
        .collect();
    let (ma, mb) = incs.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let (ma, mb) = (ma / n as f64, mb / n as f64);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (a, b) in &incs {
        sab += (a - ma) * (b - mb);
        saa += (a - ma).powi(2);
        sbb += (b - mb).powi(2);
    }
    let r = sab / (saa * sbb).sqrt();
    let se = (1.0 - r * r) / (n as f64).sqrt();
    assert!((r - rho).abs() < 3.0 * se, "empirical {r} vs {rho} (se {se})");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn correlation_is_bounded(t in 0.0f64..1.99, x1 in -1.0f64..1.5, x2 in -1.0f64..1.5) {
        let (factory, restaurant) = factory_preset();
        let curve = DiscountCurve::zero();
        let posts = factor_posteriors(&restaurant, t, &[x1, x2]).unwrap();
        let a = vol_coefficients_multi(&factory, &curve, t, &posts[..1]).unwrap();
        let b = vol_coefficients_multi(&restaurant, &curve, t, &posts).unwrap();
        if let Ok(rho) = instantaneous_correlation(&a, &b) {
            prop_assert!(rho.abs() <= 1.0);
        }
    }
}
