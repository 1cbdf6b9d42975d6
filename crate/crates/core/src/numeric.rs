//! Floating-point comparison helpers shared by every checker.
//!
//! All inequality checks use an absolute tolerance plus a relative tolerance
//! scaled by the larger magnitude of the two sides.

/// Default tolerance for axiom and inequality checks.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Threshold used to operationalize `lim = 0` on a recorded tail.
pub const LIMIT_TOL: f64 = 1e-6;

/// Number of trailing values inspected by [`limit_is_zero`].
pub const LIMIT_WINDOW: usize = 20;

/// `lhs <= rhs` up to `tol` absolute plus `tol` relative to the larger side.
#[inline]
pub fn approx_le(lhs: f64, rhs: f64, tol: f64) -> bool {
    lhs <= rhs + tol * (1.0 + lhs.abs().max(rhs.abs()))
}

#[inline]
pub fn approx_eq(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

/// Mean of the last `window` values (or all of them, if fewer).
pub fn tail_mean(values: &[f64], window: usize) -> Option<f64> {
    if values.is_empty() || window == 0 {
        return None;
    }
    let tail = &values[values.len().saturating_sub(window)..];
    Some(tail.iter().sum::<f64>() / tail.len() as f64)
}

/// Numerical `lim = 0`: the mean of the last [`LIMIT_WINDOW`] values and the
/// last value are both below `tol`.
pub fn limit_is_zero(values: &[f64], tol: f64) -> bool {
    match (tail_mean(values, LIMIT_WINDOW), values.last()) {
        (Some(mean), Some(&last)) => mean < tol && last < tol,
        _ => false,
    }
}
