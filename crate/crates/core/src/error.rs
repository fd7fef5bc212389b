use thiserror::Error;

/// Errors raised by the pricing, filtering and simulation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Adaptive quadrature ran out of its evaluation budget.
    #[error("quadrature did not converge: estimate {estimate} with error bound {error_bound} after {evaluations} evaluations")]
    Convergence {
        estimate: f64,
        error_bound: f64,
        evaluations: usize,
    },

    /// A root finder was handed an interval without a sign change.
    #[error("no sign change on [{lo}, {hi}]: g(lo) = {g_lo}, g(hi) = {g_hi}")]
    Bracketing { lo: f64, hi: f64, g_lo: f64, g_hi: f64 },

    /// Every log weight was negative infinity.
    #[error("all weights are zero")]
    DegenerateWeights,

    /// The conditioning time is at (or numerically at) the factor horizon.
    #[error("time {t} is at the horizon {horizon}; use reveal_at_horizon")]
    Horizon { t: f64, horizon: f64 },

    /// A terminal observation does not match any admissible factor value.
    #[error("inconsistent observation: {0}")]
    Inconsistent(String),

    /// The observation covariance is singular.
    #[error("degenerate observations: {0}")]
    DegenerateObservation(String),

    /// Correlation requested for an asset with zero instantaneous volatility.
    #[error("correlation undefined: zero volatility")]
    UndefinedCorrelation,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
