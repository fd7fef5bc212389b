//! Price formation among traders who each watch a private information
//! process about the same cash flow `D_T`.
//!
//! Trader `i` quotes a bid `φ⁻S^i` and an ask `φ⁺S^i` around its valuation
//! `S^i = P_tT E[D_T | what i knows]`. When one trader's bid reaches another's
//! ask they trade, read each other's information off the quotes, and both
//! revalue on the pooled information. Afterwards each again follows only its
//! own process but keeps what it learned.
//!
//! Noises of different traders are independent. Given `D_T`, an information
//! process is Markov with `ξ_t` sufficient for its past, so a trader's
//! knowledge is the latest known value of each process.

use std::io::{self, Write};

use rand_chacha::ChaCha8Rng;

use crate::error::{domain_err, Error, Result};
use crate::filtering::{posterior_multi_signal, posterior_single, ObservationSet, HORIZON_GUARD};
use crate::market::{DiscountCurve, FactorPrior};
use crate::numerics::{find_root_monotone, Interval};
use crate::stochastic::{lanes, std_normal_sample, substream, InfoProcessSpec, TimeGrid};

/// Bid and ask multipliers `0 < φ⁻ < 1 < φ⁺`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpreadConfig {
    bid: f64,
    ask: f64,
}

impl SpreadConfig {
    pub fn new(bid: f64, ask: f64) -> Result<Self> {
        if !(bid > 0.0 && bid < 1.0 && ask > 1.0 && ask.is_finite()) {
            return domain_err(format!("need 0 < φ⁻ < 1 < φ⁺, got {bid} and {ask}"));
        }
        Ok(Self { bid, ask })
    }

    /// `φ± = 1 ± δ`.
    pub fn symmetric(delta: f64) -> Result<Self> {
        Self::new(1.0 - delta, 1.0 + delta)
    }

    pub fn bid(&self) -> f64 {
        self.bid
    }

    pub fn ask(&self) -> f64 {
        self.ask
    }
}

/// One trader's private process, its current value, and what it knows.
#[derive(Debug, Clone)]
pub struct TraderState {
    id: usize,
    spec: InfoProcessSpec,
    t: f64,
    bridge: f64,
    xi: f64,
    rng: ChaCha8Rng,
    /// Latest known `(time, value)` of each trader's process.
    knowledge: Vec<Option<(f64, f64)>>,
    valuation: f64,
}

impl TraderState {
    /// A trader at time 0 drawing its bridge noise from `rng`.
    pub fn new(id: usize, spec: InfoProcessSpec, rng: ChaCha8Rng) -> Self {
        Self {
            id,
            spec,
            t: 0.0,
            bridge: 0.0,
            xi: 0.0,
            rng,
            knowledge: Vec::new(),
            valuation: f64::NAN,
        }
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn spec(&self) -> &InfoProcessSpec {
        &self.spec
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    /// Current value of the trader's own information process.
    pub fn xi(&self) -> f64 {
        self.xi
    }

    pub fn valuation(&self) -> f64 {
        self.valuation
    }

    /// Values of other traders' processes learned at trades, as
    /// `(trader, time, value)`.
    pub fn snapshots(&self) -> Vec<(usize, f64, f64)> {
        self.knowledge
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != self.id)
            .filter_map(|(j, k)| k.map(|(t, v)| (j, t, v)))
            .collect()
    }

    fn advance(&mut self, dt: f64, payoff: f64) {
        let horizon = self.spec.horizon();
        let s = (self.t + dt).min(horizon);
        if s >= horizon {
            self.bridge = 0.0;
        } else {
            let rem = horizon - self.t;
            let mean = self.bridge * (horizon - s) / rem;
            let var = (s - self.t) * (horizon - s) / rem;
            self.bridge = mean + var.sqrt() * std_normal_sample(&mut self.rng);
        }
        self.t = s;
        self.xi = self.spec.sigma() * s * payoff + self.bridge;
        self.knowledge[self.id] = Some((s, self.xi));
    }
}

/// A trade and the valuations around it.
#[derive(Debug, Clone, PartialEq)]
pub struct TradeEvent {
    pub time: f64,
    pub buyer: usize,
    pub seller: usize,
    /// Midpoint of the crossed band `[φ⁺S^seller, φ⁻S^buyer]`.
    pub price: f64,
    pub buyer_before: f64,
    pub seller_before: f64,
    pub buyer_after: f64,
    pub seller_after: f64,
    /// Posterior entropies (nats) for discrete priors: buyer and seller
    /// before the trade, and the shared value after.
    pub entropies: Option<(f64, f64, f64)>,
}

/// Traders, the cash flow they are learning about, and the clock.
#[derive(Debug, Clone)]
pub struct Market {
    prior: FactorPrior,
    curve: DiscountCurve,
    payoff: f64,
    horizon: f64,
    t: f64,
    traders: Vec<TraderState>,
    obs_template: ObservationSet,
}

impl Market {
    /// `traders[i]` must have id `i`; all share one horizon.
    pub fn new(prior: FactorPrior, curve: DiscountCurve, payoff: f64, mut traders: Vec<TraderState>) -> Result<Self> {
        if traders.len() < 2 {
            return domain_err("need at least two traders");
        }
        let horizon = traders[0].spec.horizon();
        for (i, tr) in traders.iter().enumerate() {
            if tr.id != i {
                return domain_err(format!("trader at position {i} has id {}", tr.id));
            }
            if tr.spec.horizon() != horizon {
                return domain_err("all traders must share the horizon");
            }
            if tr.t != 0.0 {
                return domain_err("traders must start at time 0");
            }
        }
        let specs: Vec<InfoProcessSpec> = traders.iter().map(|t| t.spec).collect();
        let obs_template = ObservationSet::independent(specs)?;
        let n = traders.len();
        for tr in &mut traders {
            tr.knowledge = vec![None; n];
            tr.knowledge[tr.id] = Some((0.0, 0.0));
        }
        let mut market = Self {
            prior,
            curve,
            payoff,
            horizon,
            t: 0.0,
            traders,
            obs_template,
        };
        for i in 0..n {
            market.revalue(i)?;
        }
        Ok(market)
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn traders(&self) -> &[TraderState] {
        &self.traders
    }

    /// The realized cash flow, hidden from the traders.
    pub fn payoff(&self) -> f64 {
        self.payoff
    }

    fn revealed(&self) -> bool {
        self.t >= self.horizon * (1.0 - HORIZON_GUARD)
    }

    fn knowledge_set(&self, knowledge: &[Option<(f64, f64)>]) -> Result<ObservationSet> {
        let mut set = self.obs_template.clone();
        for (j, k) in knowledge.iter().enumerate() {
            if let Some((time, value)) = *k {
                set.push(j, time, value)?;
            }
        }
        Ok(set)
    }

    fn value_of(&self, knowledge: &[Option<(f64, f64)>]) -> Result<f64> {
        if self.revealed() {
            return Ok(self.payoff);
        }
        let post = posterior_multi_signal(&self.prior, &self.knowledge_set(knowledge)?)?;
        Ok(self.curve.discount(self.t, self.horizon)? * post.mean()?)
    }

    fn entropy_of(&self, knowledge: &[Option<(f64, f64)>]) -> Result<Option<f64>> {
        if self.revealed() || !self.prior.is_discrete() {
            return Ok(None);
        }
        Ok(posterior_multi_signal(&self.prior, &self.knowledge_set(knowledge)?)?.entropy())
    }

    fn revalue(&mut self, i: usize) -> Result<()> {
        let v = self.value_of(&self.traders[i].knowledge)?;
        self.traders[i].valuation = v;
        Ok(())
    }

    /// Pools the knowledge of `i` and `j`, keeping the latest value of
    /// each process, and revalues both.
    fn fuse(&mut self, i: usize, j: usize) -> Result<()> {
        let merged: Vec<Option<(f64, f64)>> = self.traders[i]
            .knowledge
            .iter()
            .zip(&self.traders[j].knowledge)
            .map(|(a, b)| match (*a, *b) {
                (Some(x), Some(y)) => Some(if y.0 > x.0 { y } else { x }),
                (x, y) => x.or(y),
            })
            .collect();
        let v = self.value_of(&merged)?;
        for k in [i, j] {
            self.traders[k].knowledge = merged.clone();
            self.traders[k].valuation = v;
        }
        Ok(())
    }
}

/// Advances every trader by `dt`, then matches crossed quotes pair by pair
/// in ascending `(i, j)` order, at most one trade per pair. No trading once
/// the cash flow is revealed.
pub fn step_exchange(market: &mut Market, dt: f64, spread: SpreadConfig) -> Result<Vec<TradeEvent>> {
    if !(dt > 0.0) || market.t + dt > market.horizon * (1.0 + 1e-12) {
        return domain_err(format!("step {dt} from t={} leaves [0, {}]", market.t, market.horizon));
    }
    let payoff = market.payoff;
    for tr in &mut market.traders {
        tr.advance(dt, payoff);
    }
    market.t = market.traders[0].t;
    let n = market.traders.len();
    for i in 0..n {
        market.revalue(i)?;
    }
    let mut events = Vec::new();
    if market.revealed() {
        return Ok(events);
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let (si, sj) = (market.traders[i].valuation, market.traders[j].valuation);
            let (buyer, seller) = if spread.bid * si > spread.ask * sj {
                (i, j)
            } else if spread.bid * sj > spread.ask * si {
                (j, i)
            } else {
                continue;
            };
            let (s_buy, s_sell) = (market.traders[buyer].valuation, market.traders[seller].valuation);
            let price = 0.5 * (spread.bid * s_buy + spread.ask * s_sell);
            let h_buy = market.entropy_of(&market.traders[buyer].knowledge)?;
            let h_sell = market.entropy_of(&market.traders[seller].knowledge)?;
            market.fuse(i, j)?;
            let h_after = market.entropy_of(&market.traders[i].knowledge)?;
            events.push(TradeEvent {
                time: market.t,
                buyer,
                seller,
                price,
                buyer_before: s_buy,
                seller_before: s_sell,
                buyer_after: market.traders[buyer].valuation,
                seller_after: market.traders[seller].valuation,
                entropies: match (h_buy, h_sell, h_after) {
                    (Some(a), Some(b), Some(c)) => Some((a, b, c)),
                    _ => None,
                },
            });
        }
    }
    Ok(events)
}

/// `(σ̂, ξ̂)` with `σ̂ = √(σ1² + σ2²)` and `ξ̂ = (σ1ξ1 + σ2ξ2)/σ̂`, a single
/// information process carrying what two independent ones do.
pub fn effective_information(xi1: f64, xi2: f64, sigma1: f64, sigma2: f64) -> Result<(f64, f64)> {
    let hat = (sigma1 * sigma1 + sigma2 * sigma2).sqrt();
    if !(hat > 0.0) {
        return domain_err("at least one information rate must be nonzero");
    }
    if sigma2 == 0.0 && sigma1 > 0.0 {
        return Ok((sigma1, xi1));
    }
    if sigma1 == 0.0 && sigma2 > 0.0 {
        return Ok((sigma2, xi2));
    }
    Ok((hat, (sigma1 * xi1 + sigma2 * xi2) / hat))
}

/// First-order gap `ε_t = ξ²_t − ξ¹_t` at which a buyer with spread `δ`
/// meets a seller, for a `{0, 1}` payoff:
/// `ε_t = −2δ(T−t)/(σT(1 − E[X | ξ¹_t]))`.
pub fn epsilon_first_order(delta: f64, sigma: f64, horizon: f64, t: f64, posterior_mean: f64) -> Result<f64> {
    if !(t < horizon) {
        return domain_err(format!("need t < T, got t={t}, T={horizon}"));
    }
    if !(posterior_mean < 1.0) {
        return Err(Error::Domain(format!(
            "posterior mean {posterior_mean} leaves no room above the seller's valuation"
        )));
    }
    if delta == 0.0 {
        return Ok(0.0);
    }
    Ok(-2.0 * delta * (horizon - t) / (sigma * horizon * (1.0 - posterior_mean)))
}

/// Exact `ε` solving `(1−δ)S(ξ¹) = (1+δ)S(ξ¹ + ε)` for a single-process
/// valuation `S`.
pub fn epsilon_exact(
    delta: f64,
    prior: &FactorPrior,
    spec: &InfoProcessSpec,
    curve: &DiscountCurve,
    t: f64,
    xi1: f64,
) -> Result<f64> {
    let value = |xi: f64| -> Result<f64> {
        let post = posterior_single(prior, spec, t, xi)?;
        Ok(curve.discount(t, spec.horizon())? * post.mean()?)
    };
    let target = (1.0 - delta) / (1.0 + delta) * value(xi1)?;
    let g = |eps: f64| value(xi1 + eps).map(|v| v - target).unwrap_or(f64::NAN);
    let mut width = 1e-3;
    while g(-width) > 0.0 {
        width *= 2.0;
        if width > 1e6 {
            return domain_err("no valuation matches the spread");
        }
    }
    find_root_monotone(g, Interval::new(-width, 0.0)?, 1e-15)
}

/// A full run: trade log and each trader's valuation on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketSimulation {
    pub payoff: f64,
    pub times: Vec<f64>,
    /// `valuations[i][k]` is trader `i`'s valuation after trading at `times[k]`.
    pub valuations: Vec<Vec<f64>>,
    pub events: Vec<TradeEvent>,
}

impl MarketSimulation {
    /// `time,buyer,seller,price,buyer_before,seller_before,buyer_after,seller_after`
    pub fn write_events_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(
            out,
            "time,buyer,seller,price,buyer_before,seller_before,buyer_after,seller_after"
        )?;
        for e in &self.events {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                e.time, e.buyer, e.seller, e.price, e.buyer_before, e.seller_before, e.buyer_after, e.seller_after
            )?;
        }
        Ok(())
    }

    /// `time,trader_0,trader_1,…`
    pub fn write_valuations_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let header: Vec<String> = (0..self.valuations.len()).map(|i| format!("trader_{i}")).collect();
        writeln!(out, "time,{}", header.join(","))?;
        for (k, t) in self.times.iter().enumerate() {
            let row: Vec<String> = self.valuations.iter().map(|v| v[k].to_string()).collect();
            writeln!(out, "{t},{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Lane of trader `i`'s bridge noise.
pub fn trader_lane(i: usize) -> u64 {
    lanes::BRIDGE + ((i as u64) << 16)
}

/// Simulates traders with independent information processes `specs` on
/// `grid`, drawing `D_T` from `prior`. Deterministic given the seed.
pub fn run_market_sim(
    specs: &[InfoProcessSpec],
    prior: &FactorPrior,
    curve: &DiscountCurve,
    spread: SpreadConfig,
    grid: &TimeGrid,
    seed: u64,
) -> Result<MarketSimulation> {
    if specs.len() < 2 {
        return domain_err("need at least two traders");
    }
    if specs.iter().any(|s| s.horizon() != grid.horizon()) {
        return domain_err("grid and information processes must share the horizon");
    }
    let payoff = prior.sample(&mut substream(seed, lanes::FACTOR, 0));
    let traders = specs
        .iter()
        .enumerate()
        .map(|(i, &s)| TraderState::new(i, s, substream(seed, trader_lane(i), 0)))
        .collect();
    let mut market = Market::new(prior.clone(), curve.clone(), payoff, traders)?;
    let n = specs.len();
    let mut valuations: Vec<Vec<f64>> = market.traders.iter().map(|t| vec![t.valuation]).collect();
    let mut events = Vec::new();
    for w in grid.points().windows(2) {
        events.extend(step_exchange(&mut market, w[1] - w[0], spread)?);
        for i in 0..n {
            valuations[i].push(market.traders[i].valuation);
        }
    }
    Ok(MarketSimulation {
        payoff,
        times: grid.points().to_vec(),
        valuations,
        events,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spread_bounds() {
        assert!(SpreadConfig::new(1.0, 1.1).is_err());
        assert!(SpreadConfig::new(0.9, 1.0).is_err());
        assert!(SpreadConfig::symmetric(0.0).is_err());
        let s = SpreadConfig::symmetric(0.01).unwrap();
        assert_eq!((s.bid(), s.ask()), (0.99, 1.01));
    }

    #[test]
    fn effective_process_limits() {
        assert_eq!(effective_information(0.7, -3.0, 0.4, 0.0).unwrap(), (0.4, 0.7));
        let (a, b) = (
            effective_information(0.3, 0.9, 0.2, 0.5).unwrap(),
            effective_information(0.9, 0.3, 0.5, 0.2).unwrap(),
        );
        assert_eq!(a, b);
        assert!(effective_information(1.0, 1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn epsilon_formula_values() {
        let e = epsilon_first_order(0.01, 0.25, 5.0, 2.5, 0.5).unwrap();
        assert!((e + 0.08).abs() < 1e-15);
        assert_eq!(epsilon_first_order(0.0, 0.25, 5.0, 2.5, 0.5).unwrap(), 0.0);
        let late = epsilon_first_order(0.01, 0.25, 5.0, 5.0 - 1e-12, 0.5).unwrap();
        assert!(late.abs() < 1e-12);
        assert!(epsilon_first_order(0.01, 0.25, 5.0, 2.5, 1.0).is_err());
    }

    #[test]
    fn valuations_start_at_the_forward_price() {
        let prior = FactorPrior::digital(0.6).unwrap();
        let spec = InfoProcessSpec::new(0.3, 2.0).unwrap();
        let traders = (0..3)
            .map(|i| TraderState::new(i, spec, substream(1, trader_lane(i), 0)))
            .collect();
        let m = Market::new(prior, DiscountCurve::flat(0.05).unwrap(), 1.0, traders).unwrap();
        for t in m.traders() {
            assert!((t.valuation() - 0.6 * (-0.1f64).exp()).abs() < 1e-15);
        }
    }
}
