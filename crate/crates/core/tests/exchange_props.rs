use infoprice::exchange::{
    effective_information, epsilon_exact, epsilon_first_order, run_market_sim, step_exchange, trader_lane, Market,
    SpreadConfig, TraderState,
};
use infoprice::filtering::{posterior_multi_signal, posterior_single, ObservationSet};
use infoprice::market::{DiscountCurve, FactorPrior};
use infoprice::stochastic::{mean_and_stderr, substream, InfoProcessSpec, TimeGrid};
use rand::Rng;

const HORIZON: f64 = 5.0;

fn spec(sigma: f64) -> InfoProcessSpec {
    InfoProcessSpec::new(sigma, HORIZON).unwrap()
}

fn two_trader_market(seed: u64, prior: &FactorPrior, sigmas: (f64, f64)) -> Market {
    let payoff = prior.sample(&mut substream(seed, 3, 0));
    let traders = vec![
        TraderState::new(0, spec(sigmas.0), substream(seed, trader_lane(0), 0)),
        TraderState::new(1, spec(sigmas.1), substream(seed, trader_lane(1), 0)),
    ];
    Market::new(prior.clone(), DiscountCurve::zero(), payoff, traders).unwrap()
}

fn never_trade() -> SpreadConfig {
    SpreadConfig::new(1e-9, 1e9).unwrap()
}

#[test]
fn trades_leave_both_parties_at_one_valuation() {
    let prior = FactorPrior::discrete(vec![0.2, 0.6, 1.0], vec![0.3, 0.3, 0.4]).unwrap();
    let specs = [spec(0.3), spec(0.5), spec(0.2), spec(0.4)];
    let grid = TimeGrid::uniform(HORIZON, 250).unwrap();
    let spread = SpreadConfig::symmetric(0.01).unwrap();
    let mut total = 0;
    for seed in 0..40 {
        let sim = run_market_sim(&specs, &prior, &DiscountCurve::flat(0.02).unwrap(), spread, &grid, seed).unwrap();
        for e in &sim.events {
            assert!((e.buyer_after - e.seller_after).abs() < 1e-9, "{e:?}");
            assert!(e.price >= spread.ask() * e.seller_before && e.price <= spread.bid() * e.buyer_before);
        }
        total += sim.events.len();
        // Revelation at the horizon, whatever happened before.
        for v in &sim.valuations {
            assert_eq!(*v.last().unwrap(), sim.payoff);
        }
    }
    assert!(total > 100, "only {total} trades");
}

#[test]
fn tight_spread_trades_whenever_valuations_cross() {
    let prior = FactorPrior::digital(0.8).unwrap();
    let grid = TimeGrid::uniform(HORIZON, 100).unwrap();
    let sim = run_market_sim(
        &[spec(0.25), spec(0.45)],
        &prior,
        &DiscountCurve::zero(),
        SpreadConfig::symmetric(1e-9).unwrap(),
        &grid,
        3,
    )
    .unwrap();
    assert!(sim.events.len() > 50, "{} trades", sim.events.len());
    for e in &sim.events {
        assert!((e.buyer_after - e.seller_after).abs() < 1e-9);
    }
}

#[test]
fn wide_spread_blocks_trading() {
    // Valuations stay in [1, 2], so no ratio can exceed (1 + δ) / (1 − δ) = 3.
    let prior = FactorPrior::binary(1.0, 2.0, 0.5).unwrap();
    let grid = TimeGrid::uniform(1.0, 50).unwrap();
    let specs = [
        InfoProcessSpec::new(0.3, 1.0).unwrap(),
        InfoProcessSpec::new(0.3, 1.0).unwrap(),
    ];
    let sim = run_market_sim(
        &specs,
        &prior,
        &DiscountCurve::zero(),
        SpreadConfig::symmetric(0.5).unwrap(),
        &grid,
        11,
    )
    .unwrap();
    assert!(sim.events.is_empty());
}

#[test]
fn identical_traders_never_trade() {
    let prior = FactorPrior::digital(0.4).unwrap();
    let traders = vec![
        TraderState::new(0, spec(0.3), substream(5, trader_lane(0), 0)),
        TraderState::new(1, spec(0.3), substream(5, trader_lane(0), 0)),
    ];
    let mut market = Market::new(prior, DiscountCurve::zero(), 1.0, traders).unwrap();
    let spread = SpreadConfig::symmetric(1e-6).unwrap();
    for _ in 0..99 {
        assert!(step_exchange(&mut market, 0.05, spread).unwrap().is_empty());
        let [a, b] = market.traders() else { unreachable!() };
        assert_eq!(a.valuation(), b.valuation());
    }
}

#[test]
fn first_trade_price_is_the_effective_process_price() {
    let prior = FactorPrior::discrete(vec![0.0, 0.5, 1.0], vec![0.2, 0.5, 0.3]).unwrap();
    let mut checked = 0;
    for seed in 0..30 {
        let mut market = two_trader_market(seed, &prior, (0.3, 0.5));
        let spread = SpreadConfig::symmetric(0.02).unwrap();
        while market.time() < 4.9 {
            let events = step_exchange(&mut market, 0.05, spread).unwrap();
            if let Some(e) = events.first() {
                let [a, b] = market.traders() else { unreachable!() };
                let (hat, xi_hat) = effective_information(a.xi(), b.xi(), 0.3, 0.5).unwrap();
                let t = market.time();
                let m = posterior_single(&prior, &spec(hat), t, xi_hat).unwrap().mean().unwrap();
                assert!((e.buyer_after - m).abs() < 1e-10);
                checked += 1;
                break;
            }
        }
    }
    assert!(checked > 10);
}

#[test]
fn effective_process_matches_two_signal_posterior() {
    let mut rng = substream(123, 4, 0);
    for _ in 0..100 {
        let n = rng.random_range(2..5);
        let outcomes: Vec<f64> = (0..n).map(|i| i as f64 + rng.random_range(0.0..0.9)).collect();
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
        let total: f64 = w.iter().sum();
        let prior = FactorPrior::discrete(outcomes, w.iter().map(|x| x / total).collect()).unwrap();
        let (s1, s2) = (rng.random_range(0.05..1.0), rng.random_range(0.05..1.0));
        let t = rng.random_range(0.1..4.9);
        let (x1, x2) = (rng.random_range(-2.0..3.0), rng.random_range(-2.0..3.0));
        let set = ObservationSet::independent(vec![spec(s1), spec(s2)])
            .unwrap()
            .with(0, t, x1)
            .unwrap()
            .with(1, t, x2)
            .unwrap();
        let pooled = posterior_multi_signal(&prior, &set).unwrap().mean().unwrap();
        let (hat, xi_hat) = effective_information(x1, x2, s1, s2).unwrap();
        let effective = posterior_single(&prior, &spec(hat), t, xi_hat).unwrap().mean().unwrap();
        assert!((pooled - effective).abs() < 1e-10, "{pooled} vs {effective}");
    }
}

#[test]
fn first_order_gap_error_is_quadratic_in_spread() {
    let prior = FactorPrior::digital(0.5).unwrap();
    let s = spec(0.25);
    let t = 2.5;
    let xi1 = 0.5 * 0.25 * t;
    let mean = posterior_single(&prior, &s, t, xi1).unwrap().mean().unwrap();
    assert!((mean - 0.5).abs() < 1e-15);
    let err = |delta: f64| {
        let exact = epsilon_exact(delta, &prior, &s, &DiscountCurve::zero(), t, xi1).unwrap();
        (exact - epsilon_first_order(delta, 0.25, HORIZON, t, mean).unwrap()).abs()
    };
    for delta in [0.02, 0.01, 0.005] {
        let ratio = err(delta) / err(delta / 2.0);
        assert!((3.5..=4.5).contains(&ratio), "δ = {delta}: ratio {ratio}");
    }
}

#[test]
fn valuations_drift_apart_after_a_trade() {
    let prior = FactorPrior::digital(0.6).unwrap();
    let mut gaps = vec![Vec::new(); 6];
    for seed in 0..1000 {
        let mut market = two_trader_market(seed, &prior, (0.4, 0.4));
        step_exchange(&mut market, 0.5, never_trade()).unwrap();
        let events = step_exchange(&mut market, 0.05, SpreadConfig::symmetric(1e-12).unwrap()).unwrap();
        assert_eq!(events.len(), 1);
        for slot in gaps.iter_mut() {
            let [a, b] = market.traders() else { unreachable!() };
            slot.push((a.valuation() - b.valuation()).powi(2));
            step_exchange(&mut market, 0.05, never_trade()).unwrap();
        }
    }
    assert!(gaps[0].iter().all(|&g| g < 1e-18));
    for k in 1..gaps.len() {
        let diffs: Vec<f64> = gaps[k].iter().zip(&gaps[k - 1]).map(|(a, b)| a - b).collect();
        let (m, se) = mean_and_stderr(&diffs);
        assert!(m > 3.0 * se, "step {k}: {m} ± {se}");
    }
}

#[test]
fn pooling_lowers_expected_entropy() {
    let prior = FactorPrior::discrete(vec![0.0, 0.5, 1.0], vec![0.3, 0.3, 0.4]).unwrap();
    let (mut before_buy, mut before_sell, mut after) = (Vec::new(), Vec::new(), Vec::new());
    for seed in 0..1000 {
        let mut market = two_trader_market(seed, &prior, (0.3, 0.5));
        step_exchange(&mut market, 2.0, never_trade()).unwrap();
        let events = step_exchange(&mut market, 0.05, SpreadConfig::symmetric(1e-12).unwrap()).unwrap();
        let (hb, hs, ha) = events[0].entropies.unwrap();
        before_buy.push(hb);
        before_sell.push(hs);
        after.push(ha);
    }
    let mean = |v: &[f64]| mean_and_stderr(v).0;
    assert!(mean(&after) <= mean(&before_buy) + 1e-9);
    assert!(mean(&after) <= mean(&before_sell) + 1e-9);
}

#[test]
fn same_seed_same_market() {
    let prior = FactorPrior::digital(0.7).unwrap();
    let grid = TimeGrid::uniform(HORIZON, 80).unwrap();
    let specs = [spec(0.2), spec(0.35), spec(0.5)];
    let spread = SpreadConfig::symmetric(0.01).unwrap();
    let a = run_market_sim(&specs, &prior, &DiscountCurve::zero(), spread, &grid, 77).unwrap();
    let b = run_market_sim(&specs, &prior, &DiscountCurve::zero(), spread, &grid, 77).unwrap();
    assert_eq!(a, b);
}
