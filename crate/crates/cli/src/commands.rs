use std::fmt::Write as _;

use infoprice::dynamics::simulate_asset;
use infoprice::exchange::{run_market_sim, SpreadConfig};
use infoprice::filtering::price_multi_dividend;
use infoprice::infotheory::{joint_mutual_information, mutual_information};
use infoprice::options::{
    binary_call_price, binary_delta, call_price_semianalytic, mc_call_price_bridge, BinaryCall, CallSpec,
};
use infoprice::stochastic::{InfoProcessSpec, TimeGrid};
use infoprice::strategies::{run_stat_arb, StatArbConfig};

use crate::config::{MarketSimConfig, MutualInfoConfig, OptionConfig, PriceConfig, SimulateConfig, StatArbConfigFile};
use crate::CliError;

/// Agreement required between the binary closed form and the quadrature.
const CLOSED_FORM_TOL: f64 = 1e-10;
const QUADRATURE_TOL: f64 = 1e-13;

/// A CSV body (header plus rows) and the file it goes to.
pub struct Table {
    pub file: &'static str,
    pub body: String,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn price(cfg: &PriceConfig) -> Result<Vec<Table>, CliError> {
    let asset = cfg.asset.build()?;
    let curve = cfg.curve.build()?;
    let m = asset.factor_count();
    if cfg.times.is_empty() || cfg.xi.is_empty() {
        return Err(CliError::Config("`times` and `xi` must be non-empty".into()));
    }
    if let Some(bad) = cfg.xi.iter().find(|x| x.len() != m) {
        return Err(CliError::Config(format!(
            "each `xi` entry needs {m} values, got {}",
            bad.len()
        )));
    }
    let mut body = String::from("t");
    for j in 0..m {
        write!(body, ",xi_{j}").unwrap();
    }
    body.push_str(",price\n");
    for &t in &cfg.times {
        for xi in &cfg.xi {
            let p = price_multi_dividend(&asset, &curve, t, xi)?;
            write!(body, "{t}").unwrap();
            for x in xi {
                write!(body, ",{x}").unwrap();
            }
            writeln!(body, ",{p}").unwrap();
        }
    }
    Ok(vec![Table {
        file: "price.csv",
        body,
    }])
}

pub fn simulate(cfg: &SimulateConfig, seed: u64) -> Result<Vec<Table>, CliError> {
    let asset = cfg.asset.build()?;
    let curve = cfg.curve.build()?;
    let dates = asset.dates();
    let grid = TimeGrid::uniform_with(dates[dates.len() - 1], cfg.steps, dates)?;
    let sim = simulate_asset(&asset, &curve, &grid, cfg.paths, seed)?;
    let mut out = Vec::new();
    sim.write_csv(&mut out)?;
    Ok(vec![Table {
        file: "simulate.csv",
        body: String::from_utf8(out).expect("CSV is UTF-8"),
    }])
}

pub fn option(cfg: &OptionConfig, seed: u64) -> Result<Vec<Table>, CliError> {
    let prior = cfg.prior.build()?;
    let spec = InfoProcessSpec::new(cfg.sigma, cfg.horizon)?;
    let curve = cfg.curve.build()?;
    if cfg.strikes.is_empty() {
        return Err(CliError::Config("`strikes` must be non-empty".into()));
    }
    let mut body = String::from(
        "strike,regime,semi_analytic,closed_form,closed_form_diff,closed_form_agrees,delta,mc_price,mc_stderr,mc_agrees\n",
    );
    for (k, &strike) in cfg.strikes.iter().enumerate() {
        let call = CallSpec::new(strike, cfg.maturity, prior.clone(), spec, curve.clone())?;
        let semi = call_price_semianalytic(&call, QUADRATURE_TOL)?;
        let (closed, delta) = match cfg.prior.as_binary() {
            Some((d0, d1, p1)) => {
                let b = BinaryCall {
                    p1,
                    d0,
                    d1,
                    sigma: cfg.sigma,
                    maturity: cfg.maturity,
                    horizon: cfg.horizon,
                    strike,
                };
                (
                    Some(binary_call_price(&b, &curve)?.price),
                    Some(binary_delta(&b, &curve)?),
                )
            }
            None => (None, None),
        };
        let diff = closed.map(|c| (c - semi.price).abs());
        let (mc, se) = if cfg.paths > 0 {
            let (m, s) = mc_call_price_bridge(&call, cfg.paths, seed.wrapping_add(k as u64))?;
            (Some(m), Some(s))
        } else {
            (None, None)
        };
        // Every path out of the money leaves no spread to compare against.
        let mc_agrees = mc
            .zip(se)
            .filter(|&(_, s)| s > 0.0)
            .map(|(m, s)| (m - semi.price).abs() <= 3.0 * s);
        if diff.is_some_and(|d| d > CLOSED_FORM_TOL) || mc_agrees == Some(false) {
            eprintln!("warning: pricers disagree at strike {strike}");
        }
        writeln!(
            body,
            "{strike},{:?},{},{},{},{},{},{},{},{}",
            semi.regime,
            semi.price,
            opt(closed),
            opt(diff),
            diff.map(|d| (d <= CLOSED_FORM_TOL).to_string()).unwrap_or_default(),
            opt(delta),
            opt(mc),
            opt(se),
            mc_agrees.map(|a| a.to_string()).unwrap_or_default(),
        )
        .unwrap();
    }
    Ok(vec![Table {
        file: "option.csv",
        body,
    }])
}

pub fn mutual_info(cfg: &MutualInfoConfig) -> Result<Vec<Table>, CliError> {
    let prior = cfg.prior.build()?;
    let spec = InfoProcessSpec::new(cfg.sigma, cfg.horizon)?;
    let extra = InfoProcessSpec::new(cfg.sigma_informed, cfg.horizon)?;
    let entropy = prior.entropy();
    let mut body = String::from("t,j_market,j_informed,delta_j,prior_entropy\n");
    for &t in &cfg.times {
        let market = mutual_information(&prior, &spec, t)?;
        let informed = joint_mutual_information(&prior, &spec, &extra, cfg.rho, t)?;
        writeln!(body, "{t},{market},{informed},{},{}", informed - market, opt(entropy)).unwrap();
    }
    Ok(vec![Table {
        file: "mutual_info.csv",
        body,
    }])
}

pub fn stat_arb(cfg: &StatArbConfigFile, seed: u64) -> Result<Vec<Table>, CliError> {
    let prior = cfg.prior.build()?;
    let curve = cfg.curve.build()?;
    let mut body = String::from(
        "t,mean_market,stderr_market,mean_informed,stderr_informed,mean_excess,stderr_excess,\
         market_buy_rate,informed_buy_rate\n",
    );
    for &t in &cfg.times {
        let r = run_stat_arb(&StatArbConfig {
            prior: prior.clone(),
            sigma: cfg.sigma,
            sigma_informed: cfg.sigma_informed,
            rho: cfg.rho,
            horizon: cfg.horizon,
            decision_time: t,
            threshold: cfg.threshold,
            curve: curve.clone(),
            n_trials: cfg.trials,
            seed,
        })?;
        writeln!(
            body,
            "{t},{},{},{},{},{},{},{},{}",
            r.mean_market,
            r.stderr_market,
            r.mean_informed,
            r.stderr_informed,
            r.mean_excess,
            r.stderr_excess,
            r.market_buy_rate,
            r.informed_buy_rate
        )
        .unwrap();
    }
    Ok(vec![Table {
        file: "stat_arb.csv",
        body,
    }])
}

pub fn market_sim(cfg: &MarketSimConfig, seed: u64) -> Result<Vec<Table>, CliError> {
    let prior = cfg.prior.build()?;
    let curve = cfg.curve.build()?;
    let specs = cfg
        .sigmas
        .iter()
        .map(|&s| InfoProcessSpec::new(s, cfg.horizon))
        .collect::<infoprice::Result<Vec<_>>>()?;
    let grid = TimeGrid::uniform(cfg.horizon, cfg.steps)?;
    let spread = SpreadConfig::symmetric(cfg.spread)?;
    let sim = run_market_sim(&specs, &prior, &curve, spread, &grid, seed)?;
    let (mut events, mut valuations) = (Vec::new(), Vec::new());
    sim.write_events_csv(&mut events)?;
    sim.write_valuations_csv(&mut valuations)?;
    Ok(vec![
        Table {
            file: "market_events.csv",
            body: String::from_utf8(events).expect("CSV is UTF-8"),
        },
        Table {
            file: "market_valuations.csv",
            body: String::from_utf8(valuations).expect("CSV is UTF-8"),
        },
    ])
}
