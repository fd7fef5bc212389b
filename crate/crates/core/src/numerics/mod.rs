//! Deterministic numerical kernels.
//!
//! Everything here is a pure function of its inputs: the standard normal
//! distribution, Gauss–Legendre quadrature with adaptive bisection, a
//! bracketed root finder for monotone functions, and log-space weight
//! normalization.

mod interval;
mod quadrature;
mod roots;
mod special;
mod weights;

pub use interval::Interval;
pub use quadrature::{graded_breaks, integrate, integrate_with_breaks, Integrator, QuadratureRule};
pub use roots::{find_root_monotone, find_root_monotone_with_derivative};
pub use special::{ln_normal_pdf, normal_cdf, normal_pdf, std_normal_cdf, std_normal_quantile_tail};
pub use weights::{log_sum_exp, normalize_log_weights};
