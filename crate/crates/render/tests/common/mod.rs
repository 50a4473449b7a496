//! Motion-model oracle shared by the render tests.
#![allow(dead_code)]

use nalgebra::{Matrix3, Rotation3, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rsstitch_core::{Homography, Pixel, RsDiffModel, RsParams};

pub const W: f64 = 1280.0;
pub const H: f64 = 720.0;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn intrinsics() -> Matrix3<f64> {
    let f = W / (2.0 * 30f64.to_radians().tan());
    Matrix3::new(f, 0.0, (W - 1.0) / 2.0, 0.0, f, (H - 1.0) / 2.0, 0.0, 0.0, 1.0)
}

pub fn unit(r: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0), r.random_range(-1.0..1.0));
        if v.norm() > 0.1 && v.norm() <= 1.0 {
            return v.normalize();
        }
    }
}

pub struct Motion {
    pub omega: Vector3<f64>,
    pub v: Vector3<f64>,
    pub n: Vector3<f64>,
}

pub fn random_motion(r: &mut ChaCha8Rng, omega_deg: f64, speed: f64) -> Motion {
    let n = loop {
        let n = unit(r);
        let n = if n.z < 0.0 { -n } else { n };
        if n.z >= 0.5 {
            break n;
        }
    };
    Motion {
        omega: unit(r) * omega_deg.to_radians(),
        v: unit(r) * speed,
        n,
    }
}

pub fn differential(m: &Motion) -> Homography {
    let wx = Matrix3::new(0.0, -m.omega.z, m.omega.y, m.omega.z, 0.0, -m.omega.x, -m.omega.y, m.omega.x, 0.0);
    let k = intrinsics();
    Homography::new(-(k * (wx + m.v * m.n.transpose()) * k.try_inverse().unwrap()))
}

/// Finite-motion homography whose first-order part is [`differential`].
pub fn discrete(m: &Motion) -> Homography {
    let r = Rotation3::new(-m.omega).into_inner();
    let k = intrinsics();
    Homography::new(k * (r - m.v * m.n.transpose()) * k.try_inverse().unwrap())
}

pub fn model(r: &mut ChaCha8Rng, omega_deg: f64, speed: f64, k: f64) -> (RsDiffModel, Motion) {
    let m = random_motion(r, omega_deg, speed);
    (RsDiffModel::new(differential(&m), k, RsParams::new(1.0, H).unwrap()).unwrap(), m)
}

pub fn beta1(k: f64, y: f64) -> f64 {
    let t = y / H;
    (t + 0.5 * k * t * t) * 2.0 / (2.0 + k)
}

pub fn beta2(k: f64, y: f64) -> f64 {
    let t = 1.0 + y / H;
    (t + 0.5 * k * t * t) * 2.0 / (2.0 + k)
}

pub fn flow(h: &Homography, p: Pixel) -> Vector2<f64> {
    let q = h.0 * p.homogeneous();
    Vector2::new(q.x - p.x * q.z, q.y - p.y * q.z)
}

/// Frame-2 match of `p` by fixed-point iteration on the scanline equation.
pub fn oracle_p2(m: &RsDiffModel, p: Pixel) -> Pixel {
    let f = flow(&m.h, p);
    let mut y2 = p.y + f.y;
    for _ in 0..200 {
        y2 = p.y + (beta2(m.k, y2) - beta1(m.k, p.y)) * f.y;
    }
    Pixel::new(p.x + (beta2(m.k, y2) - beta1(m.k, p.y)) * f.x, y2)
}

pub fn random_pixel(r: &mut ChaCha8Rng) -> Pixel {
    Pixel::new(r.random_range(0.0..W - 1.0), r.random_range(0.0..H - 1.0))
}
