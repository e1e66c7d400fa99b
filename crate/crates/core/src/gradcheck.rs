//! Central-difference gradient oracle.
//!
//! Every hand-derived gradient in this crate is checked against this oracle.
//! It must stay independent of the code paths it verifies: plain central
//! differences on a caller-supplied scalar function, nothing else.

use thiserror::Error;

use crate::scalar::Scalar;

/// Default step; balances truncation against roundoff at f64 precision.
pub const DEFAULT_STEP: f64 = 1e-5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("objective returned a non-finite value while perturbing coordinate {coordinate}")]
    NonFinite { coordinate: usize },
    #[error("step must be positive and finite, got {0}")]
    BadStep(f64),
}

/// Gradient of `f` at `x` by central differences with step `h` per coordinate.
pub fn finite_diff_grad<T, F>(mut f: F, x: &[T], h: T) -> Result<Vec<T>, OracleError>
where
    T: Scalar,
    F: FnMut(&[T]) -> T,
{
    if !(h > T::zero()) || !h.is_finite() {
        return Err(OracleError::BadStep(h.to_f64()));
    }
    let mut point = x.to_vec();
    let two_h = h + h;
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let orig = point[i];
        point[i] = orig + h;
        let plus = f(&point);
        point[i] = orig - h;
        let minus = f(&point);
        point[i] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(OracleError::NonFinite { coordinate: i });
        }
        grad.push((plus - minus) / two_h);
    }
    Ok(grad)
}

/// Max relative error between an analytic gradient and the oracle.
///
/// `floor` is the magnitude below which a coordinate switches to absolute
/// comparison (error divided by `floor` instead of the coordinate itself):
/// central differences carry ~1e-11 of additive roundoff, so a pure
/// relative comparison of near-zero coordinates would measure only that
/// noise. Pick `floor` two orders below the meaningful gradient scale.
pub fn max_rel_error<T: Scalar>(analytic: &[T], numeric: &[T], floor: f64) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    let mut worst = 0.0f64;
    for (&a, &n) in analytic.iter().zip(numeric) {
        let a = a.to_f64();
        let n = n.to_f64();
        let denom = a.abs().max(n.abs()).max(floor);
        worst = worst.max((a - n).abs() / denom);
    }
    worst
}
