use nalgebra::{Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rsstitch_core::{Correspondence, MotionSpec, Pixel, Plane, RsDiffModel};
use rsstitch_render::forward_map_rs;
use serde::{Deserialize, Serialize};

use crate::camera::CameraConfig;
use crate::error::{Error, Result};
use crate::project::{project_rs, Frame};

/// Parameters of a random planar scene.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneConfig {
    pub omega_deg: f64,
    /// Translation magnitude relative to the mean scene depth.
    pub speed: f64,
    pub k: f64,
    pub n_points: usize,
    pub camera: CameraConfig,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            omega_deg: 3.0,
            speed: 0.03,
            k: 0.0,
            n_points: 100,
            camera: CameraConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub motion: MotionSpec,
    pub plane: Plane,
    pub points: Vec<Vector3<f64>>,
    pub camera: CameraConfig,
    pub seed: u64,
}

/// How frame-2 positions are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Generator {
    /// Exact projection of the 3D points in both frames. The differential
    /// model describes this only to first order in the motion.
    Physical,
    /// Frame-1 projection, then the ground-truth differential model maps it
    /// into frame 2. Flows then satisfy the model exactly.
    Differential,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrespondenceSet {
    pub observed: Vec<Correspondence>,
    /// Noise-free counterparts of `observed`.
    pub clean: Vec<Correspondence>,
}

fn unit(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

const MAX_ATTEMPTS: usize = 64;

impl SyntheticScene {
    /// Random motion directions, a plane within 60° of the optical axis at
    /// mean point depth 1, and points visible in both frames.
    pub fn generate(cfg: &SceneConfig, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cam = cfg.camera;
        let corners = [
            Pixel::new(0.0, 0.0),
            Pixel::new((cam.width - 1) as f64, 0.0),
            Pixel::new(0.0, (cam.height - 1) as f64),
            Pixel::new((cam.width - 1) as f64, (cam.height - 1) as f64),
        ];
        for _ in 0..MAX_ATTEMPTS {
            let motion = MotionSpec::new(unit(&mut rng) * cfg.omega_deg.to_radians(), unit(&mut rng) * cfg.speed, cfg.k)?;
            let n = loop {
                let n = unit(&mut rng);
                let n = if n.z < 0.0 { -n } else { n };
                if n.z >= 0.5 {
                    break n;
                }
            };
            // reject planes seen nearly edge-on somewhere in the image
            if corners.iter().any(|&c| {
                let r = cam.ray(c);
                n.dot(&r) < 0.2 * r.norm()
            }) {
                continue;
            }
            let depth = |p: Pixel, d: f64| {
                let r = cam.ray(p);
                r * (d / n.dot(&r))
            };
            let mean_z = (0..400)
                .map(|_| {
                    let p = Pixel::new(rng.random_range(0.0..cam.width as f64), rng.random_range(0.0..cam.height as f64));
                    depth(p, 1.0).z
                })
                .sum::<f64>()
                / 400.0;
            let d = 1.0 / mean_z;
            let plane = Plane::new(n, d)?;

            let mut points = Vec::with_capacity(cfg.n_points);
            let mut tries = 0;
            while points.len() < cfg.n_points && tries < 50 * cfg.n_points {
                tries += 1;
                let p = Pixel::new(
                    rng.random_range(0.0..(cam.width - 1) as f64),
                    rng.random_range(0.0..(cam.height - 1) as f64),
                );
                let x = depth(p, d);
                let ok = [Frame::First, Frame::Second].iter().all(|&f| {
                    project_rs(&x, &motion, f, &cam).is_ok_and(|q| cam.contains(q.pixel))
                });
                if ok {
                    points.push(x);
                }
            }
            if points.len() == cfg.n_points {
                return Ok(Self {
                    motion,
                    plane,
                    points,
                    camera: cam,
                    seed,
                });
            }
        }
        Err(Error::Scene(format!("no visible scene after {MAX_ATTEMPTS} attempts (seed {seed})")))
    }

    /// `(-K(⌊ω⌋× + v nᵀ/d)K⁻¹, k)` with the camera's readout parameters.
    pub fn ground_truth(&self) -> RsDiffModel {
        let h = self.motion.differential_homography(&self.plane, &self.camera.intrinsics());
        RsDiffModel {
            h,
            k: self.motion.k,
            rs: self.camera.rs,
        }
    }

    /// Scales depth and translation jointly; images are unchanged.
    pub fn rescaled(&self, lambda: f64) -> Result<Self> {
        let mut s = self.clone();
        s.motion.v *= lambda;
        s.plane = Plane::new(self.plane.normal.into_inner(), self.plane.distance * lambda)?;
        for p in &mut s.points {
            *p *= lambda;
        }
        Ok(s)
    }

    /// Noise-free correspondences of every scene point.
    pub fn clean_correspondences(&self, generator: Generator) -> Result<Vec<Correspondence>> {
        let gt = self.ground_truth();
        self.points
            .iter()
            .map(|x| {
                let p1 = project_rs(x, &self.motion, Frame::First, &self.camera)?.pixel;
                let p2 = match generator {
                    Generator::Physical => project_rs(x, &self.motion, Frame::Second, &self.camera)?.pixel,
                    Generator::Differential => forward_map_rs(&gt, p1).ok_or(Error::NotObserved { frame: 2 })?,
                };
                Ok(Correspondence::from_points(p1, p2))
            })
            .collect()
    }

    pub fn to_file(&self) -> SceneFile {
        SceneFile {
            omega: self.motion.omega.into(),
            v: self.motion.v.into(),
            k: self.motion.k,
            normal: self.plane.normal.into_inner().into(),
            distance: self.plane.distance,
            points: self.points.iter().map(|p| (*p).into()).collect(),
            width: self.camera.width,
            height: self.camera.height,
            hfov_deg: self.camera.hfov_deg,
            gamma: self.camera.rs.gamma,
            seed: self.seed,
        }
    }

    pub fn from_file(f: &SceneFile) -> Result<Self> {
        Ok(Self {
            motion: MotionSpec::new(f.omega.into(), f.v.into(), f.k)?,
            plane: Plane::new(f.normal.into(), f.distance)?,
            points: f.points.iter().map(|&p| p.into()).collect(),
            camera: CameraConfig::new(f.width, f.height, f.hfov_deg, f.gamma)?,
            seed: f.seed,
        })
    }
}

/// JSON form of a scene, for pinning regression cases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneFile {
    pub omega: [f64; 3],
    pub v: [f64; 3],
    pub k: f64,
    pub normal: [f64; 3],
    pub distance: f64,
    pub points: Vec<[f64; 3]>,
    pub width: usize,
    pub height: usize,
    pub hfov_deg: f64,
    pub gamma: f64,
    pub seed: u64,
}

impl SceneFile {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Correspondences of `scene` with i.i.d. Gaussian noise of standard
/// deviation `sigma_g` pixels added to both projected points.
pub fn gen_correspondences(
    scene: &SyntheticScene,
    sigma_g: f64,
    generator: Generator,
    rng: &mut ChaCha8Rng,
) -> Result<CorrespondenceSet> {
    if !(sigma_g >= 0.0) {
        return Err(Error::Config(format!("noise level {sigma_g} must be non-negative")));
    }
    let clean = scene.clean_correspondences(generator)?;
    let observed = if sigma_g == 0.0 {
        clean.clone()
    } else {
        let normal = Normal::new(0.0, sigma_g).map_err(|e| Error::Config(e.to_string()))?;
        clean
            .iter()
            .map(|c| {
                let mut n = || normal.sample(rng);
                let p1 = c.p1.offset(&Vector2::new(n(), n()));
                let p2 = c.p2().offset(&Vector2::new(n(), n()));
                Correspondence::from_points(p1, p2)
            })
            .collect()
    };
    Ok(CorrespondenceSet { observed, clean })
}
