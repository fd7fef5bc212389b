use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::OnceLock;

use super::Interval;
use crate::error::{domain_err, Error, Result};

/// Points per panel of the adaptive integrator.
const PANEL_ORDER: usize = 10;

/// A fixed quadrature rule on a finite interval.
///
/// Invariants: weights are strictly positive and sum to the interval width;
/// nodes are strictly increasing and lie strictly inside the interval.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    domain: Interval,
}

impl QuadratureRule {
    /// The `n`-point Gauss–Legendre rule mapped onto `domain`.
    ///
    /// Exact for polynomials of degree `2n - 1`. Nodes are the roots of the
    /// Legendre polynomial `P_n`, found by Newton iteration from the
    /// Tricomi initial guess.
    pub fn gauss_legendre(n: usize, domain: Interval) -> Result<Self> {
        if n == 0 {
            return domain_err("Gauss-Legendre rule needs at least one node");
        }
        let (x, w) = legendre_reference(n);
        Ok(Self::from_reference(&x, &w, domain))
    }

    fn from_reference(x: &[f64], w: &[f64], domain: Interval) -> Self {
        let half = 0.5 * domain.width();
        let mid = domain.midpoint();
        let nodes = x.iter().map(|&xi| mid + half * xi).collect();
        let weights = w.iter().map(|&wi| half * wi).collect();
        Self { nodes, weights, domain }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn domain(&self) -> Interval {
        self.domain
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`,
/// in increasing node order.
fn legendre_reference(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 1e-16 * x.abs().max(1.0) {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

fn panel_reference() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| legendre_reference(PANEL_ORDER))
}

/// Adaptive Gauss–Legendre integration with interval bisection.
///
/// Each panel is integrated both whole and as two halves; their difference
/// is the panel's error estimate. The panel with the largest estimate is
/// bisected until the summed estimate drops below the tolerance (floored at
/// the roundoff level of the integral) or the panel budget is exhausted.
#[derive(Debug, Clone, Copy)]
pub struct Integrator {
    pub tol: f64,
    pub max_panels: usize,
}

impl Integrator {
    pub fn new(tol: f64) -> Self {
        Self {
            tol,
            max_panels: 20_000,
        }
    }

    pub fn with_max_panels(mut self, max_panels: usize) -> Self {
        self.max_panels = max_panels;
        self
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, domain: Interval) -> Result<f64> {
        self.integrate_with_breaks(f, domain, &[])
    }

    /// Like [`Integrator::integrate`], with the initial panels split at every
    /// break point strictly inside the domain. Use breaks to point the
    /// integrator at narrow features it might otherwise step over.
    pub fn integrate_with_breaks<F: Fn(f64) -> f64>(&self, f: F, domain: Interval, breaks: &[f64]) -> Result<f64> {
        if !(self.tol > 0.0) {
            return domain_err(format!("tolerance must be positive, got {}", self.tol));
        }
        let (x, w) = panel_reference();
        let rule = |a: f64, b: f64| -> f64 {
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            half * x.iter().zip(w).map(|(&xi, &wi)| wi * f(mid + half * xi)).sum::<f64>()
        };

        let mut cuts: Vec<f64> = breaks
            .iter()
            .copied()
            .filter(|b| b.is_finite() && *b > domain.lo() && *b < domain.hi())
            .collect();
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let mut edges = Vec::with_capacity(cuts.len() + 2);
        edges.push(domain.lo());
        edges.extend(cuts);
        edges.push(domain.hi());

        let mut evaluations = 0usize;
        let mut make_panel = |a: f64, b: f64, whole: f64| -> Panel {
            let m = 0.5 * (a + b);
            let left = rule(a, m);
            let right = rule(m, b);
            evaluations += 2 * PANEL_ORDER;
            Panel {
                a,
                b,
                left,
                right,
                error: (whole - (left + right)).abs(),
            }
        };

        let mut heap = BinaryHeap::new();
        for pair in edges.windows(2) {
            let whole = rule(pair[0], pair[1]);
            heap.push(make_panel(pair[0], pair[1], whole));
        }

        let totals = |heap: &BinaryHeap<Panel>| {
            heap.iter()
                .fold((0.0, 0.0), |acc, p| (acc.0 + p.error, acc.1 + p.value().abs()))
        };
        let (mut err_sum, mut magnitude) = totals(&heap);
        loop {
            if !err_sum.is_finite() || !magnitude.is_finite() {
                return domain_err("integrand is not finite on the domain");
            }
            let floor = 64.0 * f64::EPSILON * magnitude;
            if err_sum <= self.tol.max(floor) {
                // Running sums drift; confirm with an exact recount.
                let (exact_err, exact_mag) = totals(&heap);
                if exact_err <= self.tol.max(64.0 * f64::EPSILON * exact_mag) {
                    return Ok(ordered_sum(&heap));
                }
                err_sum = exact_err;
                magnitude = exact_mag;
            }
            if heap.len() >= self.max_panels {
                return Err(Error::Convergence {
                    estimate: ordered_sum(&heap),
                    error_bound: err_sum,
                    evaluations,
                });
            }
            let worst = heap.pop().expect("heap is never empty");
            err_sum -= worst.error;
            magnitude -= worst.value().abs();
            let m = 0.5 * (worst.a + worst.b);
            if !(worst.a < m && m < worst.b) {
                // Panel cannot be split further; its error is roundoff.
                magnitude += worst.value().abs();
                heap.push(Panel { error: 0.0, ..worst });
                continue;
            }
            for child in [make_panel(worst.a, m, worst.left), make_panel(m, worst.b, worst.right)] {
                err_sum += child.error;
                magnitude += child.value().abs();
                heap.push(child);
            }
        }
    }
}

/// Sum of panel values in left-to-right order, so the result does not depend
/// on the heap layout.
fn ordered_sum(heap: &BinaryHeap<Panel>) -> f64 {
    let mut panels: Vec<&Panel> = heap.iter().collect();
    panels.sort_by(|p, q| p.a.total_cmp(&q.a));
    panels.iter().map(|p| p.value()).sum()
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    left: f64,
    right: f64,
    error: f64,
}

impl Panel {
    fn value(&self) -> f64 {
        self.left + self.right
    }
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Panel {}

impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

/// Break points graded geometrically around a narrow feature: `center`, and
/// `center ± scale·4^k` for every `k ≥ 0` that stays inside `domain`.
///
/// Panels built from these have widths proportional to their distance from
/// the feature, so a bump of width `scale` is resolved wherever it sits.
pub fn graded_breaks(center: f64, scale: f64, domain: Interval) -> Vec<f64> {
    let mut out = Vec::new();
    if !(center.is_finite() && scale.is_finite() && scale > 0.0) {
        return out;
    }
    if domain.contains(center) {
        out.push(center);
    }
    let mut step = scale;
    while step < 4.0 * domain.width() {
        for x in [center - step, center + step] {
            if x > domain.lo() && x < domain.hi() {
                out.push(x);
            }
        }
        step *= 4.0;
    }
    out
}

/// Integrates `f` over `domain` to absolute tolerance `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, domain: Interval, tol: f64) -> Result<f64> {
    Integrator::new(tol).integrate(f, domain)
}

pub fn integrate_with_breaks<F: Fn(f64) -> f64>(f: F, domain: Interval, breaks: &[f64], tol: f64) -> Result<f64> {
    Integrator::new(tol).integrate_with_breaks(f, domain, breaks)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> Interval {
        Interval::new(0.0, 1.0).unwrap()
    }

    #[test]
    fn rule_invariants() {
        for n in 1..=40 {
            let d = Interval::new(-2.0, 5.0).unwrap();
            let rule = QuadratureRule::gauss_legendre(n, d).unwrap();
            assert!(rule.weights().iter().all(|&w| w > 0.0));
            let sum: f64 = rule.weights().iter().sum();
            assert!((sum - d.width()).abs() < 1e-12, "n={n} sum={sum}");
            assert!(rule.nodes().windows(2).all(|p| p[0] < p[1]));
            assert!(rule.nodes().iter().all(|&x| x > d.lo() && x < d.hi()));
        }
    }

    #[test]
    fn rule_is_exact_to_degree_2n_minus_1() {
        let rule = QuadratureRule::gauss_legendre(6, unit()).unwrap();
        // ∫_0^1 x^11 dx = 1/12
        assert!((rule.integrate(|x| x.powi(11)) - 1.0 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn trivial_integrals() {
        assert!((integrate(|_| 1.0, unit(), 1e-12).unwrap() - 1.0).abs() < 1e-14);
        assert!((integrate(|x| x, unit(), 1e-12).unwrap() - 0.5).abs() < 1e-14);
        let pdf = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let got = integrate(pdf, Interval::new(-8.0, 8.0).unwrap(), 1e-12).unwrap();
        assert!((got - 1.0).abs() < 1e-12, "{got}");
    }

    #[test]
    fn narrow_spike_found_with_break() {
        let c = 0.3141;
        let s = 1e-5;
        let f = |x: f64| (-0.5 * ((x - c) / s).powi(2)).exp() / (s * (2.0 * std::f64::consts::PI).sqrt());
        let d = Interval::new(-10.0, 10.0).unwrap();
        let got = integrate_with_breaks(f, d, &graded_breaks(c, s, d), 1e-10).unwrap();
        assert!((got - 1.0).abs() < 1e-9, "{got}");
    }

    #[test]
    fn budget_exhaustion_reports_convergence_error() {
        let f = |x: f64| if x < 1.0 / 3.0 { 0.0 } else { 1.0 };
        let err = Integrator::new(1e-300)
            .with_max_panels(20)
            .integrate(f, unit())
            .unwrap_err();
        match err {
            Error::Convergence { estimate, .. } => assert!((estimate - 2.0 / 3.0).abs() < 0.1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_nonpositive_tolerance() {
        assert!(integrate(|x| x, unit(), 0.0).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn poly(c: &[f64], x: f64) -> f64 {
            c.iter().rev().fold(0.0, |acc, &k| acc * x + k)
        }

        proptest! {
            #[test]
            fn linear_in_the_integrand(
                f in prop::collection::vec(-5.0f64..5.0, 1..9),
                g in prop::collection::vec(-5.0f64..5.0, 1..9),
                alpha in -3.0f64..3.0,
                beta in -3.0f64..3.0,
                lo in -2.0f64..0.0,
                width in 0.1f64..4.0,
            ) {
                let tol = 1e-10;
                let d = Interval::new(lo, lo + width).unwrap();
                let combo = integrate(|x| alpha * poly(&f, x) + beta * poly(&g, x), d, tol).unwrap();
                let sep = alpha * integrate(|x| poly(&f, x), d, tol).unwrap()
                    + beta * integrate(|x| poly(&g, x), d, tol).unwrap();
                prop_assert!((combo - sep).abs() < 3.0 * tol);
            }
        }
    }
}
