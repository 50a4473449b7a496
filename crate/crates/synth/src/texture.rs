//! Procedural plane textures and an exact rolling-shutter renderer.
//!
//! Every output row is rendered from its own pose: the pixel ray is cast from
//! the scanline's camera centre and intersected with the scene plane, and the
//! texture is evaluated at the hit point. 2×2 supersampling, each sub-sample
//! using the pose of its own sub-row.

use std::f64::consts::TAU;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rsstitch_core::{MotionSpec, Pixel, Plane};
use rsstitch_render::Raster;

use crate::camera::{rodrigues, CameraConfig};
use crate::error::Result;
use crate::project::{pose_scale, Frame};

#[derive(Debug, Clone, Copy, PartialEq)]
struct Wave {
    freq: [f64; 2],
    phase: f64,
    amp: f64,
}

/// Smoothed checkerboard plus band-limited sinusoids, in plane units.
#[derive(Debug, Clone, PartialEq)]
pub struct Texture {
    /// Checker cell size.
    pub period: f64,
    /// Edge steepness of the checker; large values approach a hard step.
    pub sharpness: f64,
    waves: Vec<Wave>,
}

impl Texture {
    /// Checker of cell size 0.05 with six random sinusoids of 4 to 30
    /// cycles per unit.
    pub fn procedural(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let waves = (0..6)
            .map(|_| {
                let f = rng.random_range(4.0..30.0);
                let a = rng.random_range(0.0..TAU);
                Wave {
                    freq: [f * a.cos(), f * a.sin()],
                    phase: rng.random_range(0.0..TAU),
                    amp: rng.random_range(0.5..1.0),
                }
            })
            .collect();
        Self {
            period: 0.05,
            sharpness: 3.0,
            waves,
        }
    }

    /// Plain high-contrast checkerboard.
    pub fn checkerboard(period: f64) -> Self {
        Self {
            period,
            sharpness: 40.0,
            waves: Vec::new(),
        }
    }

    /// Intensity in `[0, 255]` at plane coordinates `(u, v)`.
    pub fn value(&self, u: f64, v: f64) -> f64 {
        let step = |t: f64| (self.sharpness * (TAU * t / (2.0 * self.period)).sin()).tanh();
        let checker = 0.5 + 0.5 * step(u) * step(v);
        let total: f64 = self.waves.iter().map(|w| w.amp).sum();
        let noise = if total > 0.0 {
            self.waves
                .iter()
                .map(|w| w.amp * (TAU * (w.freq[0] * u + w.freq[1] * v) + w.phase).sin())
                .sum::<f64>()
                / total
        } else {
            0.0
        };
        let mix = if self.waves.is_empty() { 0.0 } else { 0.35 };
        (30.0 + 195.0 * ((1.0 - mix) * checker + mix * (0.5 + 0.5 * noise))).clamp(0.0, 255.0)
    }
}

/// Pose scale per image row.
#[derive(Debug, Clone, Copy)]
pub enum Exposure {
    /// Rolling shutter, frame 1 or 2 of the motion.
    Rolling(Frame),
    /// One pose for all rows, at the given scale of the inter-frame motion.
    Global(f64),
}

pub struct PlaneRenderer<'a> {
    pub plane: &'a Plane,
    pub motion: &'a MotionSpec,
    pub camera: &'a CameraConfig,
    pub texture: &'a Texture,
    e1: Vector3<f64>,
    e2: Vector3<f64>,
}

impl<'a> PlaneRenderer<'a> {
    pub fn new(plane: &'a Plane, motion: &'a MotionSpec, camera: &'a CameraConfig, texture: &'a Texture) -> Self {
        let n = plane.normal.into_inner();
        let seed = if n.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
        let e1 = (seed - n * n.dot(&seed)).normalize();
        let e2 = n.cross(&e1);
        Self {
            plane,
            motion,
            camera,
            texture,
            e1,
            e2,
        }
    }

    /// Texture seen through pixel `p` by the camera at pose scale `b`, or
    /// `None` if the ray misses the plane.
    pub fn shade(&self, p: Pixel, b: f64) -> Option<f64> {
        let r = rodrigues(&(self.motion.omega * b)) * self.camera.ray(p);
        let c = self.motion.v * b;
        let n = self.plane.normal.into_inner();
        let denom = n.dot(&r);
        let t = (self.plane.distance - n.dot(&c)) / denom;
        if !(denom.abs() > 1e-12) || !(t > 0.0) {
            return None;
        }
        let x = c + r * t;
        Some(self.texture.value(x.dot(&self.e1), x.dot(&self.e2)))
    }

    pub fn render(&self, exposure: Exposure) -> Result<Raster> {
        let (w, h) = (self.camera.width, self.camera.height);
        let rows: Vec<(Vec<u8>, Vec<bool>)> = (0..h)
            .into_par_iter()
            .map(|y| {
                let mut data = vec![0u8; w];
                let mut mask = vec![true; w];
                for x in 0..w {
                    let mut acc = 0.0;
                    for (dx, dy) in [(-0.25, -0.25), (0.25, -0.25), (-0.25, 0.25), (0.25, 0.25)] {
                        let p = Pixel::new(x as f64 + dx, y as f64 + dy);
                        let b = match exposure {
                            Exposure::Rolling(f) => pose_scale(self.motion, f, p.y, self.camera),
                            Exposure::Global(b) => b,
                        };
                        match self.shade(p, b) {
                            Some(v) => acc += 0.25 * v,
                            None => {
                                mask[x] = false;
                                break;
                            }
                        }
                    }
                    data[x] = if mask[x] { acc.round() as u8 } else { 0 };
                }
                (data, mask)
            })
            .collect();
        let (data, mask): (Vec<Vec<u8>>, Vec<Vec<bool>>) = rows.into_iter().unzip();
        let raster = Raster::from_data(w, h, 1, data.concat())?;
        let mask = mask.concat();
        Ok(if mask.iter().all(|&m| m) { raster } else { raster.with_mask(mask)? })
    }
}

/// Frames 1 and 2 of a textured plane seen by a rolling-shutter camera.
pub fn render_pair(plane: &Plane, motion: &MotionSpec, camera: &CameraConfig, texture: &Texture) -> Result<(Raster, Raster)> {
    let r = PlaneRenderer::new(plane, motion, camera, texture);
    Ok((r.render(Exposure::Rolling(Frame::First))?, r.render(Exposure::Rolling(Frame::Second))?))
}
