//! Exact rolling-shutter projection.
//!
//! A world point is imaged on the scanline `y` whose own pose sees it there:
//! `g(y) = π_y(K·R(β(y)ω)ᵀ(X - β(y)v)) - y = 0`. The rotation makes `g`
//! transcendental, so the root is bracketed on a grid over `[0, h]` and
//! refined by a safeguarded secant (Illinois) iteration.

use nalgebra::Vector3;
use rsstitch_core::rs::{beta1_unchecked, beta2_unchecked};
use rsstitch_core::{MotionSpec, Pixel};

use crate::camera::{to_camera, CameraConfig};
use crate::error::{Error, Result};

const GRID: usize = 32;
const TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frame {
    First,
    Second,
}

impl Frame {
    fn id(self) -> u8 {
        match self {
            Frame::First => 1,
            Frame::Second => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub pixel: Pixel,
    /// `|g(y)|` at the returned scanline.
    pub residual: f64,
    /// More than one scanline sees the point; the one nearest the
    /// global-shutter projection was kept.
    pub ambiguous: bool,
}

/// Pose scale of scanline `y` in `frame`.
pub fn pose_scale(motion: &MotionSpec, frame: Frame, y: f64, camera: &CameraConfig) -> f64 {
    match frame {
        Frame::First => beta1_unchecked(motion.k, y, &camera.rs),
        Frame::Second => beta2_unchecked(motion.k, y, &camera.rs),
    }
}

fn image_at(x: &Vector3<f64>, motion: &MotionSpec, frame: Frame, y: f64, camera: &CameraConfig) -> Option<Pixel> {
    camera.project(&to_camera(x, motion, pose_scale(motion, frame, y, camera)))
}

fn refine(g: &impl Fn(f64) -> Option<f64>, mut a: f64, mut b: f64, mut fa: f64, mut fb: f64) -> Option<f64> {
    for _ in 0..200 {
        let c = b - fb * (b - a) / (fb - fa);
        let c = if c.is_finite() && c > a.min(b) && c < a.max(b) { c } else { 0.5 * (a + b) };
        let fc = g(c)?;
        if fc.abs() <= TOL * 1e-3 || (b - a).abs() <= 1e-13 * (1.0 + c.abs()) {
            return Some(c);
        }
        if fc * fb < 0.0 {
            a = b;
            fa = fb;
        } else {
            fa *= 0.5;
        }
        b = c;
        fb = fc;
    }
    Some(b)
}

/// Pixel at which `frame` images world point `x`.
pub fn project_rs(x: &Vector3<f64>, motion: &MotionSpec, frame: Frame, camera: &CameraConfig) -> Result<Projection> {
    let not_seen = Error::NotObserved { frame: frame.id() };
    let h = camera.height as f64;
    let g = |y: f64| image_at(x, motion, frame, y, camera).map(|p| p.y - y);

    let ys: Vec<f64> = (0..=GRID).map(|i| h * i as f64 / GRID as f64).collect();
    let gs: Vec<Option<f64>> = ys.iter().map(|&y| g(y)).collect();
    let mut roots = Vec::new();
    for i in 0..GRID {
        let (Some(ga), Some(gb)) = (gs[i], gs[i + 1]) else { continue };
        if ga == 0.0 {
            roots.push(ys[i]);
        } else if ga * gb < 0.0 {
            if let Some(r) = refine(&g, ys[i], ys[i + 1], ga, gb) {
                roots.push(r);
            }
        }
    }
    if let Some(Some(gl)) = gs.last() {
        if *gl == 0.0 {
            roots.push(h);
        }
    }
    let gs_y = {
        let b0 = pose_scale(motion, frame, 0.0, camera);
        camera.project(&to_camera(x, motion, b0)).map(|p| p.y)
    };
    let target = gs_y.unwrap_or(h / 2.0);
    let y = roots
        .iter()
        .copied()
        .min_by(|a, b| (a - target).abs().total_cmp(&(b - target).abs()))
        .ok_or(not_seen)?;
    let p = image_at(x, motion, frame, y, camera).ok_or(Error::NotObserved { frame: frame.id() })?;
    let residual = (p.y - y).abs();
    if residual > TOL {
        return Err(Error::NotObserved { frame: frame.id() });
    }
    Ok(Projection {
        pixel: Pixel::new(p.x, y),
        residual,
        ambiguous: roots.len() > 1,
    })
}
