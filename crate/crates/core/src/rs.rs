//! Scanline pose interpolation under constant acceleration.
//!
//! The camera pose at scanline `y1` of frame 1 (resp. `y2` of frame 2) is the
//! inter-frame motion `(ω, v)` scaled by `β₁(k, y1)` (resp. `β₂(k, y2)`),
//! measured from the first scanline of frame 1. With readout ratio `γ` and
//! `h` scanlines:
//!
//! ```text
//! β₁(k, y) = (γy/h + ½k(γy/h)²) · 2/(2+k)
//! β₂(k, y) = (1 + γy/h + ½k(1 + γy/h)²) · 2/(2+k)
//! β(k, y1, y2) = β₂(k, y2) - β₁(k, y1)
//! ```
//!
//! The `*_unchecked` variants skip the `k > -2` domain test and are used on
//! hot paths after a model has been validated.

use crate::error::Result;
use crate::geometry::{check_acceleration, RsParams};
use crate::scalar::Real;

#[inline]
pub fn beta1_unchecked<T: Real>(k: T, y1: T, rs: &RsParams<T>) -> T {
    let t = rs.line_rate() * y1;
    let two = T::lit(2.0);
    (t + T::lit(0.5) * k * t * t) * (two / (two + k))
}

#[inline]
pub fn beta2_unchecked<T: Real>(k: T, y2: T, rs: &RsParams<T>) -> T {
    let t = T::one() + rs.line_rate() * y2;
    let two = T::lit(2.0);
    (t + T::lit(0.5) * k * t * t) * (two / (two + k))
}

#[inline]
pub fn beta_unchecked<T: Real>(k: T, y1: T, y2: T, rs: &RsParams<T>) -> T {
    beta2_unchecked(k, y2, rs) - beta1_unchecked(k, y1, rs)
}

/// Frame-1 pose scale `β₁(k, y1)`.
pub fn beta1<T: Real>(k: T, y1: T, rs: &RsParams<T>) -> Result<T> {
    check_acceleration(k)?;
    Ok(beta1_unchecked(k, y1, rs))
}

/// Frame-2 pose scale `β₂(k, y2)`.
pub fn beta2<T: Real>(k: T, y2: T, rs: &RsParams<T>) -> Result<T> {
    check_acceleration(k)?;
    Ok(beta2_unchecked(k, y2, rs))
}

/// Relative pose scale between scanline `y1` of frame 1 and `y2` of frame 2.
pub fn beta<T: Real>(k: T, y1: T, y2: T, rs: &RsParams<T>) -> Result<T> {
    check_acceleration(k)?;
    Ok(beta_unchecked(k, y1, y2, rs))
}

/// `β(k, y1, y2) · (2+k)/2` written as `a + b·k`.
///
/// Clearing the never-vanishing factor `2/(2+k)` leaves an expression affine
/// in `k`; the 5-point solver relies on this to turn its determinant into a
/// polynomial.
#[inline]
pub fn beta_affine_parts<T: Real>(y1: T, y2: T, rs: &RsParams<T>) -> (T, T) {
    let t1 = rs.line_rate() * y1;
    let t2 = T::one() + rs.line_rate() * y2;
    (t2 - t1, T::lit(0.5) * (t2 * t2 - t1 * t1))
}
