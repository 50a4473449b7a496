//! Flow fields generated by differential homographies.

use nalgebra::{Matrix2, SMatrix, Vector2};

use crate::geometry::{Homography, Pixel, RsDiffModel};
use crate::rs::beta_unchecked;
use crate::scalar::Real;

/// Global-shutter flow `[(I - x̂e₃ᵀ) H x̂]_xy` at pixel `p`.
///
/// Any `H + εI` yields the same flow.
#[inline]
pub fn flow_gs<T: Real>(h: &Homography<T>, p: Pixel<T>) -> Vector2<T> {
    let hx = h.matrix() * p.homogeneous();
    Vector2::new(hx.x - p.x * hx.z, hx.y - p.y * hx.z)
}

/// Rolling-shutter flow `β(k, y1, y2) · flow_gs(H, p1)`.
#[inline]
pub fn flow_rs<T: Real>(model: &RsDiffModel<T>, p1: Pixel<T>, y2: T) -> Vector2<T> {
    flow_gs(&model.h, p1) * beta_unchecked(model.k, p1.y, y2, &model.rs)
}

/// Coefficient rows `b(p)` with `b(p) · vec(H) = flow_gs(H, p)`, where
/// `vec` is row-major.
#[inline]
pub fn flow_coeff_rows<T: Real>(p: Pixel<T>) -> SMatrix<T, 2, 9> {
    let (x, y) = (p.x, p.y);
    let (o, z) = (T::one(), T::zero());
    SMatrix::<T, 2, 9>::from_row_slice(&[
        x, y, o, z, z, z, -x * x, -x * y, -x, //
        z, z, z, x, y, o, -x * y, -y * y, -y,
    ])
}

/// Jacobian of `flow_gs(H, ·)` with respect to the pixel position.
pub fn flow_jacobian<T: Real>(h: &Homography<T>, p: Pixel<T>) -> Matrix2<T> {
    let m = h.matrix();
    let w = m[(2, 0)] * p.x + m[(2, 1)] * p.y + m[(2, 2)];
    Matrix2::new(
        m[(0, 0)] - w - p.x * m[(2, 0)],
        m[(0, 1)] - p.x * m[(2, 1)],
        m[(1, 0)] - p.y * m[(2, 0)],
        m[(1, 1)] - w - p.y * m[(2, 1)],
    )
}
