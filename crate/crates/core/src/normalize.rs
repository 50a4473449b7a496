//! Isotropic point normalization for well-conditioned linear solves.

use nalgebra::Matrix3;

use crate::error::{Error, Result};
use crate::geometry::{Correspondence, Homography, Pixel};
use crate::scalar::Real;

/// Similarity `x ↦ s·(x - c)` taking a point set to zero centroid and mean
/// distance √2 from the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Similarity<T> {
    pub scale: T,
    pub cx: T,
    pub cy: T,
}

impl<T: Real> Similarity<T> {
    pub fn identity() -> Self {
        Self {
            scale: T::one(),
            cx: T::zero(),
            cy: T::zero(),
        }
    }

    pub fn matrix(&self) -> Matrix3<T> {
        let (s, z, o) = (self.scale, T::zero(), T::one());
        Matrix3::new(s, z, -s * self.cx, z, s, -s * self.cy, z, z, o)
    }

    pub fn inverse_matrix(&self) -> Matrix3<T> {
        let (r, z, o) = (T::one() / self.scale, T::zero(), T::one());
        Matrix3::new(r, z, self.cx, z, r, self.cy, z, z, o)
    }

    #[inline]
    pub fn apply(&self, p: Pixel<T>) -> Pixel<T> {
        Pixel::new(self.scale * (p.x - self.cx), self.scale * (p.y - self.cy))
    }

    #[inline]
    pub fn unapply(&self, p: Pixel<T>) -> Pixel<T> {
        Pixel::new(p.x / self.scale + self.cx, p.y / self.scale + self.cy)
    }

    /// Flows are differences of points, so only the scale acts on them.
    #[inline]
    pub fn apply_correspondence(&self, c: &Correspondence<T>) -> Correspondence<T> {
        Correspondence::new(self.apply(c.p1), c.flow * self.scale)
    }

    /// Maps a differential homography estimated in normalized coordinates
    /// back to pixels: `H = T⁻¹ H' T`. Conjugation keeps `εI` as `εI`.
    pub fn denormalize_differential(&self, h_norm: &Homography<T>) -> Homography<T> {
        Homography(self.inverse_matrix() * h_norm.matrix() * self.matrix())
    }

    /// Inverse of [`Self::denormalize_differential`].
    pub fn normalize_differential(&self, h: &Homography<T>) -> Homography<T> {
        Homography(self.matrix() * h.matrix() * self.inverse_matrix())
    }
}

/// Normalizing similarity of a point set.
pub fn normalize_points<T: Real>(points: &[Pixel<T>]) -> Result<Similarity<T>> {
    if points.len() < 2 {
        return Err(Error::DegenerateConfiguration(
            "normalization needs at least two points".into(),
        ));
    }
    if points.iter().any(|p| !p.is_finite()) {
        return Err(Error::NonFinite);
    }
    let n = T::from_count(points.len());
    let (sx, sy) = points
        .iter()
        .fold((T::zero(), T::zero()), |(ax, ay), p| (ax + p.x, ay + p.y));
    let (cx, cy) = (sx / n, sy / n);
    let mean_dist = points
        .iter()
        .map(|p| ((p.x - cx) * (p.x - cx) + (p.y - cy) * (p.y - cy)).sqrt())
        .fold(T::zero(), |a, d| a + d)
        / n;
    let spread = cx.abs().max(cy.abs()).max(T::one());
    if !(mean_dist > spread * T::eps() * T::lit(16.0)) {
        return Err(Error::DegenerateConfiguration("all points coincide".into()));
    }
    Ok(Similarity {
        scale: T::lit(std::f64::consts::SQRT_2) / mean_dist,
        cx,
        cy,
    })
}

/// Normalizes frame-1 positions and scales flows by the same factor.
pub fn hartley_normalize<T: Real>(
    corrs: &[Correspondence<T>],
) -> Result<(Similarity<T>, Vec<Correspondence<T>>)> {
    let pts: Vec<_> = corrs.iter().map(|c| c.p1).collect();
    let sim = normalize_points(&pts)?;
    let scaled = corrs.iter().map(|c| sim.apply_correspondence(c)).collect();
    Ok((sim, scaled))
}
