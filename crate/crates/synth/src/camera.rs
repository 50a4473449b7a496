use nalgebra::{Matrix3, Rotation3, Vector3};
use rsstitch_core::{MotionSpec, Pixel, RsParams};

use crate::error::{Error, Result};

/// Pinhole rolling-shutter camera with square pixels and the principal point
/// at the image center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraConfig {
    pub width: usize,
    pub height: usize,
    /// Horizontal field of view in degrees.
    pub hfov_deg: f64,
    pub rs: RsParams,
}

impl Default for CameraConfig {
    fn default() -> Self {
        Self::new(1280, 720, 60.0, 1.0).expect("default camera is valid")
    }
}

impl CameraConfig {
    pub fn new(width: usize, height: usize, hfov_deg: f64, gamma: f64) -> Result<Self> {
        if width == 0 || height < 2 {
            return Err(Error::Config(format!("bad image size {width}x{height}")));
        }
        if !(hfov_deg > 0.0 && hfov_deg < 180.0) {
            return Err(Error::Config(format!("field of view {hfov_deg} outside (0, 180)")));
        }
        Ok(Self {
            width,
            height,
            hfov_deg,
            rs: RsParams::new(gamma, height as f64)?,
        })
    }

    pub fn with_gamma(mut self, gamma: f64) -> Result<Self> {
        self.rs = RsParams::new(gamma, self.height as f64)?;
        Ok(self)
    }

    pub fn focal(&self) -> f64 {
        self.width as f64 / (2.0 * (self.hfov_deg.to_radians() / 2.0).tan())
    }

    pub fn intrinsics(&self) -> Matrix3<f64> {
        let f = self.focal();
        let (cx, cy) = self.principal_point();
        Matrix3::new(f, 0.0, cx, 0.0, f, cy, 0.0, 0.0, 1.0)
    }

    /// Principal point at the center of the pixel grid (pixel centers are integers).
    pub fn principal_point(&self) -> (f64, f64) {
        ((self.width as f64 - 1.0) / 2.0, (self.height as f64 - 1.0) / 2.0)
    }

    /// Calibrated ray `K⁻¹x̂` through pixel `p`.
    pub fn ray(&self, p: Pixel) -> Vector3<f64> {
        let f = self.focal();
        let (cx, cy) = self.principal_point();
        Vector3::new((p.x - cx) / f, (p.y - cy) / f, 1.0)
    }

    /// Projection of a camera-frame point, `None` behind the camera.
    pub fn project(&self, xc: &Vector3<f64>) -> Option<Pixel> {
        if !(xc.z > 1e-12) {
            return None;
        }
        let f = self.focal();
        let (cx, cy) = self.principal_point();
        Some(Pixel::new(f * xc.x / xc.z + cx, f * xc.y / xc.z + cy))
    }

    pub fn contains(&self, p: Pixel) -> bool {
        p.x >= 0.0 && p.y >= 0.0 && p.x <= (self.width - 1) as f64 && p.y <= (self.height - 1) as f64
    }
}

/// `exp(⌊θ⌋×)` by Rodrigues' formula.
pub fn rodrigues(theta: &Vector3<f64>) -> Matrix3<f64> {
    Rotation3::new(*theta).into_inner()
}

/// Camera-frame coordinates of world point `x` at pose scale `b`: the camera
/// has rotated by `exp(⌊bω⌋×)` and moved by `b·v`.
pub fn to_camera(x: &Vector3<f64>, motion: &MotionSpec, b: f64) -> Vector3<f64> {
    rodrigues(&(motion.omega * b)).transpose() * (x - motion.v * b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn focal_from_fov() {
        let c = CameraConfig::default();
        assert!((c.focal() - 640.0 / 30f64.to_radians().tan()).abs() < 1e-9);
        assert!(CameraConfig::new(10, 10, 180.0, 1.0).is_err());
        assert!(CameraConfig::new(10, 1, 60.0, 1.0).is_err());
    }

    #[test]
    fn rodrigues_matches_closed_form() {
        let t = Vector3::<f64>::new(0.3, -0.2, 0.5);
        let a = t.norm();
        let k = rsstitch_core::geometry::skew(&(t / a));
        let expect = Matrix3::identity() + k * a.sin() + k * k * (1.0 - a.cos());
        assert!((rodrigues(&t) - expect).abs().max() < 1e-14);
    }

    #[test]
    fn ray_and_project_are_inverse() {
        let c = CameraConfig::default();
        let p = Pixel::new(100.5, 600.25);
        let q = c.project(&(c.ray(p) * 3.0)).unwrap();
        assert!(q.distance(p) < 1e-10);
    }
}
