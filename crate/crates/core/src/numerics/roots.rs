use super::Interval;
use crate::error::{Error, Result};

const MAX_ITER: usize = 300;

/// Root of a strictly monotone function on a sign-changing bracket.
///
/// Newton steps use a forward-difference slope; any step that leaves the
/// current bracket or fails to halve the step before last is replaced by
/// bisection, so the bracket keeps shrinking and the iteration terminates.
/// Stops once `|g(x)|` is at the roundoff level of `g` on the bracket or the
/// step falls below `tol`.
pub fn find_root_monotone<G: Fn(f64) -> f64>(g: G, bracket: Interval, tol: f64) -> Result<f64> {
    let slope = |x: f64, gx: f64, width: f64| {
        let h = f64::EPSILON.sqrt() * x.abs().max(width.min(1.0)).max(f64::MIN_POSITIVE);
        let d = (g(x + h) - gx) / h;
        d
    };
    solve(&g, &slope, bracket, tol)
}

/// As [`find_root_monotone`], with the derivative supplied by the caller.
pub fn find_root_monotone_with_derivative<G, D>(g: G, dg: D, bracket: Interval, tol: f64) -> Result<f64>
where
    G: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    solve(&g, &|x, _, _| dg(x), bracket, tol)
}

fn solve(g: &dyn Fn(f64) -> f64, slope: &dyn Fn(f64, f64, f64) -> f64, bracket: Interval, tol: f64) -> Result<f64> {
    let (mut lo, mut hi) = (bracket.lo(), bracket.hi());
    let g_lo = g(lo);
    let g_hi = g(hi);
    if g_lo == 0.0 {
        return Ok(lo);
    }
    if g_hi == 0.0 {
        return Ok(hi);
    }
    if !(g_lo.is_finite() && g_hi.is_finite()) || g_lo.signum() == g_hi.signum() {
        return Err(Error::Bracketing { lo, hi, g_lo, g_hi });
    }
    let increasing = g_hi > 0.0;
    let g_tol = 4.0 * f64::EPSILON * g_lo.abs().max(g_hi.abs());

    // Start from the secant point of the bracket.
    let mut x = lo - g_lo * (hi - lo) / (g_hi - g_lo);
    if !(x > lo && x < hi) {
        x = 0.5 * (lo + hi);
    }
    let mut step_old = hi - lo;
    let mut step = step_old;
    for _ in 0..MAX_ITER {
        let gx = g(x);
        if !gx.is_finite() {
            return Err(Error::Domain(format!("function not finite at {x}")));
        }
        if gx.abs() <= g_tol {
            return Ok(x);
        }
        if (gx > 0.0) == increasing {
            hi = x;
        } else {
            lo = x;
        }
        if hi - lo <= tol {
            return Ok(x);
        }
        let d = slope(x, gx, hi - lo);
        let newton = if d.is_finite() && d != 0.0 {
            Some(x - gx / d)
        } else {
            None
        };
        let (next, this_step) = match newton {
            Some(n) if n > lo && n < hi && (n - x).abs() < 0.5 * step_old.abs() => (n, n - x),
            _ => {
                let mid = 0.5 * (lo + hi);
                (mid, mid - x)
            }
        };
        step_old = step;
        step = this_step;
        if step.abs() <= tol {
            return Ok(next);
        }
        x = next;
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn iv(a: f64, b: f64) -> Interval {
        Interval::new(a, b).unwrap()
    }

    #[test]
    fn linear_and_cubic() {
        let r = find_root_monotone(|x| x - 0.3, iv(0.0, 1.0), 1e-14).unwrap();
        assert!((r - 0.3).abs() < 1e-14);
        let r = find_root_monotone(|x| x * x * x, iv(-1.0, 2.0), 1e-12).unwrap();
        assert!(r.abs() < 1e-4, "{r}");
        assert!((r * r * r).abs() < 1e-12);
    }

    #[test]
    fn decreasing_function() {
        let r = find_root_monotone(|x| 2.0 - x.exp(), iv(-5.0, 5.0), 1e-14).unwrap();
        assert!((r - 2f64.ln()).abs() < 1e-13);
    }

    #[test]
    fn with_derivative() {
        let r = find_root_monotone_with_derivative(|x| x.powi(3) - 8.0, |x| 3.0 * x * x, iv(0.0, 10.0), 1e-15).unwrap();
        assert!((r - 2.0).abs() < 1e-14);
    }

    #[test]
    fn no_sign_change() {
        let err = find_root_monotone(|x| x + 5.0, iv(0.0, 1.0), 1e-12).unwrap_err();
        assert!(matches!(err, Error::Bracketing { .. }));
    }

    #[test]
    fn binary_logistic_inversion() {
        // S(ξ) = p1 e^{k(σξ - σ²t/2)} / (p0 + p1 e^{...}); closed-form inverse.
        let (p1, sigma, t, horizon, k_strike) = (0.8f64, 0.25f64, 1.0f64, 5.0f64, 0.7f64);
        let k = horizon / (horizon - t);
        let s = |xi: f64| {
            let e = p1 * (k * (sigma * xi - 0.5 * sigma * sigma * t)).exp();
            e / (1.0 - p1 + e)
        };
        let exact = ((k_strike * (1.0 - p1) / (p1 * (1.0 - k_strike))).ln() / k + 0.5 * sigma * sigma * t) / sigma;
        let r = find_root_monotone(|x| s(x) - k_strike, iv(-20.0, 20.0), 1e-14).unwrap();
        assert!((r - exact).abs() < 1e-12, "{r} vs {exact}");
    }

    proptest! {
        // x ↦ a(x - c)^3 + b(x - c) with a, b > 0 is strictly increasing.
        #[test]
        fn random_monotone_cubics(
            a in 0.01f64..10.0, b in 0.0f64..10.0, c in -3.0f64..3.0, sign in prop::bool::ANY,
        ) {
            let s = if sign { 1.0 } else { -1.0 };
            let g = |x: f64| s * (a * (x - c).powi(3) + b * (x - c));
            let br = iv(-5.0, 5.0);
            let scale = g(br.lo()).abs().max(g(br.hi()).abs());
            let r = find_root_monotone(g, br, 1e-13).unwrap();
            let eps = 1e-12;
            // The image of a tiny neighbourhood of r straddles zero up to g-scale roundoff.
            prop_assert!(g(r - eps) * s <= 8.0 * f64::EPSILON * scale);
            prop_assert!(g(r + eps) * s >= -8.0 * f64::EPSILON * scale);
            prop_assert!((r - c).abs() < 1e-4);
        }
    }
}
