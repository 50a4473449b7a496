//! Geometric value types: pixels, correspondences, homographies and the
//! rolling-shutter motion model.
//!
//! Image coordinates have their origin at the top-left pixel center, `x`
//! grows to the right and `y` grows downward. `y` doubles as the scanline
//! index: scanline 0 is the first one read out.

use nalgebra::{Matrix3, Unit, Vector2, Vector3};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pixel<T> {
    pub x: T,
    pub y: T,
}

impl<T: Real> Pixel<T> {
    #[inline]
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn from_vector(v: &Vector2<T>) -> Self {
        Self { x: v.x, y: v.y }
    }

    #[inline]
    pub fn to_vector(self) -> Vector2<T> {
        Vector2::new(self.x, self.y)
    }

    /// Homogeneous lift `[x, y, 1]`.
    #[inline]
    pub fn homogeneous(self) -> Vector3<T> {
        Vector3::new(self.x, self.y, T::one())
    }

    #[inline]
    pub fn offset(self, d: &Vector2<T>) -> Self {
        Self::new(self.x + d.x, self.y + d.y)
    }

    #[inline]
    pub fn distance(self, other: Self) -> T {
        (self.to_vector() - other.to_vector()).norm()
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn cast<U: Real>(self) -> Pixel<U> {
        Pixel::new(U::lit(self.x.as_f64()), U::lit(self.y.as_f64()))
    }
}

/// A frame-1 pixel together with its measured displacement to frame 2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence<T> {
    pub p1: Pixel<T>,
    pub flow: Vector2<T>,
}

impl<T: Real> Correspondence<T> {
    pub fn new(p1: Pixel<T>, flow: Vector2<T>) -> Self {
        Self { p1, flow }
    }

    pub fn from_points(p1: Pixel<T>, p2: Pixel<T>) -> Self {
        Self {
            p1,
            flow: p2.to_vector() - p1.to_vector(),
        }
    }

    /// Frame-2 position `p1 + u`.
    #[inline]
    pub fn p2(&self) -> Pixel<T> {
        self.p1.offset(&self.flow)
    }

    /// Scanline of the frame-2 observation.
    #[inline]
    pub fn y2(&self) -> T {
        self.p1.y + self.flow.y
    }

    pub fn is_finite(&self) -> bool {
        self.p1.is_finite() && self.flow.x.is_finite() && self.flow.y.is_finite()
    }

    /// Rejects non-finite entries and flows longer than `cap` pixels.
    pub fn check(&self, cap: T) -> Result<()> {
        if !self.is_finite() {
            return Err(Error::NonFinite);
        }
        if self.flow.norm() > cap {
            return Err(Error::InvalidParameter(format!(
                "flow magnitude {:.3} px exceeds sanity cap {:.3} px",
                self.flow.norm().as_f64(),
                cap.as_f64()
            )));
        }
        Ok(())
    }

    pub fn cast<U: Real>(&self) -> Correspondence<U> {
        Correspondence::new(
            self.p1.cast(),
            Vector2::new(U::lit(self.flow.x.as_f64()), U::lit(self.flow.y.as_f64())),
        )
    }
}

/// Default flow sanity cap: the image diagonal.
pub fn default_flow_cap<T: Real>(width: T, height: T) -> T {
    (width * width + height * height).sqrt()
}

/// A 3×3 planar motion model.
///
/// Used both for the discrete homography (`x2 ∝ H x1`) and for the
/// differential homography generating the flow field. A differential
/// homography is only defined up to an additive `εI`; every value stored here
/// is one representative of its class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography<T: Real>(pub Matrix3<T>);

impl<T: Real> Homography<T> {
    pub fn new(m: Matrix3<T>) -> Self {
        Self(m)
    }

    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    pub fn zero() -> Self {
        Self(Matrix3::zeros())
    }

    #[inline]
    pub fn matrix(&self) -> &Matrix3<T> {
        &self.0
    }

    /// Entries in row-major order; this is the `vec(H)` used by every solver.
    pub fn to_row_major(&self) -> [T; 9] {
        let m = &self.0;
        [
            m[(0, 0)],
            m[(0, 1)],
            m[(0, 2)],
            m[(1, 0)],
            m[(1, 1)],
            m[(1, 2)],
            m[(2, 0)],
            m[(2, 1)],
            m[(2, 2)],
        ]
    }

    pub fn from_row_major(h: &[T]) -> Self {
        assert_eq!(h.len(), 9, "row-major homography needs 9 entries");
        Self(Matrix3::from_row_slice(h))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// `H + εI`: another representative of the same differential class.
    pub fn gauge_shift(&self, eps: T) -> Self {
        Self(self.0 + Matrix3::identity() * eps)
    }

    /// Representative with zero trace.
    pub fn trace_free(&self) -> Self {
        let t = self.0.trace() / T::lit(3.0);
        self.gauge_shift(-t)
    }

    /// Scaled to unit Frobenius norm (discrete homographies are projective).
    pub fn normalized(&self) -> Self {
        let n = self.0.norm();
        if n > T::zero() {
            Self(self.0 / n)
        } else {
            *self
        }
    }

    pub fn cast<U: Real>(&self) -> Homography<U> {
        Homography(self.0.map(|v| U::lit(v.as_f64())))
    }
}

/// Rolling-shutter readout parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RsParams<T> {
    /// Readout time ratio: scanline readout time over the inter-frame period.
    pub gamma: T,
    /// Total number of scanlines.
    pub height: T,
}

impl<T: Real> RsParams<T> {
    pub fn new(gamma: T, height: T) -> Result<Self> {
        let p = Self { gamma, height };
        p.validate()?;
        Ok(p)
    }

    /// Global-shutter parameters for an image of the given height.
    pub fn global(height: T) -> Self {
        Self {
            gamma: T::zero(),
            height,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma.is_finite() && self.height.is_finite()) {
            return Err(Error::NonFinite);
        }
        if self.gamma < T::zero() || self.gamma > T::one() {
            return Err(Error::InvalidParameter(format!(
                "readout ratio gamma = {} outside [0, 1]",
                self.gamma.as_f64()
            )));
        }
        if self.height < T::lit(2.0) {
            return Err(Error::InvalidParameter(format!(
                "scanline count h = {} must be at least 2",
                self.height.as_f64()
            )));
        }
        Ok(())
    }

    /// `γ / h`, the readout time per scanline in inter-frame units.
    #[inline]
    pub fn line_rate(&self) -> T {
        self.gamma / self.height
    }

    pub fn cast<U: Real>(&self) -> RsParams<U> {
        RsParams {
            gamma: U::lit(self.gamma.as_f64()),
            height: U::lit(self.height.as_f64()),
        }
    }
}

/// Checks the acceleration parameter lies in `k > -2`.
pub fn check_acceleration<T: Real>(k: T) -> Result<()> {
    if !k.is_finite() {
        return Err(Error::NonFinite);
    }
    if k <= T::lit(-2.0) {
        return Err(Error::ParameterDomain(k.as_f64()));
    }
    Ok(())
}

/// Differential homography plus constant-acceleration rolling-shutter motion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RsDiffModel<T: Real> {
    pub h: Homography<T>,
    pub k: T,
    pub rs: RsParams<T>,
}

impl<T: Real> RsDiffModel<T> {
    pub fn new(h: Homography<T>, k: T, rs: RsParams<T>) -> Result<Self> {
        check_acceleration(k)?;
        rs.validate()?;
        if !h.is_finite() {
            return Err(Error::NonFinite);
        }
        Ok(Self { h, k, rs })
    }

    /// Global-shutter differential model (`γ = 0`, `k = 0`).
    pub fn global(h: Homography<T>, height: T) -> Self {
        Self {
            h,
            k: T::zero(),
            rs: RsParams::global(height),
        }
    }

    pub fn cast<U: Real>(&self) -> RsDiffModel<U> {
        RsDiffModel {
            h: self.h.cast(),
            k: U::lit(self.k.as_f64()),
            rs: self.rs.cast(),
        }
    }
}

/// Camera velocity between the first scanlines of two consecutive frames.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionSpec<T: Real> {
    /// Rotational velocity (radians per inter-frame period).
    pub omega: Vector3<T>,
    /// Translational velocity, in units of the average scene depth.
    pub v: Vector3<T>,
    /// Acceleration along the velocity direction.
    pub k: T,
}

impl<T: Real> MotionSpec<T> {
    pub fn new(omega: Vector3<T>, v: Vector3<T>, k: T) -> Result<Self> {
        check_acceleration(k)?;
        Ok(Self { omega, v, k })
    }

    pub fn still() -> Self {
        Self {
            omega: Vector3::zeros(),
            v: Vector3::zeros(),
            k: T::zero(),
        }
    }

    /// Uncalibrated differential homography `-K(⌊ω⌋× + v nᵀ/d)K⁻¹`.
    pub fn differential_homography(&self, plane: &Plane<T>, intrinsics: &Matrix3<T>) -> Homography<T> {
        let calibrated = skew(&self.omega) + self.v * plane.normal.transpose() / plane.distance;
        let k_inv = intrinsics
            .try_inverse()
            .expect("camera intrinsics must be invertible");
        Homography(-(intrinsics * calibrated * k_inv))
    }
}

/// Scene plane `nᵀX = d` in the coordinates of the first scanline of frame 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plane<T: Real> {
    pub normal: Unit<Vector3<T>>,
    pub distance: T,
}

impl<T: Real> Plane<T> {
    pub fn new(normal: Vector3<T>, distance: T) -> Result<Self> {
        if !(distance > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "plane distance {} must be positive",
                distance.as_f64()
            )));
        }
        let n = normal.norm();
        if !(n > T::zero()) || !n.is_finite() {
            return Err(Error::InvalidParameter("plane normal must be non-zero".into()));
        }
        Ok(Self {
            normal: Unit::new_normalize(normal),
            distance,
        })
    }

    /// Inverse depth `nᵀx̂ / d` of the calibrated ray `x̂`.
    pub fn inverse_depth(&self, ray: &Vector3<T>) -> T {
        self.normal.dot(ray) / self.distance
    }
}

/// Skew-symmetric cross-product matrix `⌊w⌋×`.
pub fn skew<T: Real>(w: &Vector3<T>) -> Matrix3<T> {
    let z = T::zero();
    Matrix3::new(z, -w.z, w.y, w.z, z, -w.x, -w.y, w.x, z)
}
