//! Independent flow oracle: builds differential homographies from motion and
//! plane parameters and solves the scanline-coupled flow equation by
//! fixed-point iteration, without touching the library's own β or flow code.
#![allow(dead_code)]

use nalgebra::{Matrix3, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rsstitch_core::{Correspondence, Homography, Pixel};

pub const W: f64 = 1280.0;
pub const H: f64 = 720.0;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn intrinsics() -> Matrix3<f64> {
    let f = W / (2.0 * (30.0f64).to_radians().tan());
    Matrix3::new(f, 0.0, (W - 1.0) / 2.0, 0.0, f, (H - 1.0) / 2.0, 0.0, 0.0, 1.0)
}

pub fn unit(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

/// `-K([ω]× + v nᵀ/d)K⁻¹` written out by hand.
pub fn motion_h(omega: Vector3<f64>, v: Vector3<f64>, n: Vector3<f64>, d: f64) -> Homography {
    let wx = Matrix3::new(
        0.0, -omega.z, omega.y, omega.z, 0.0, -omega.x, -omega.y, omega.x, 0.0,
    );
    let k = intrinsics();
    let ki = k.try_inverse().unwrap();
    Homography::new(-(k * (wx + v * n.transpose() / d) * ki))
}

/// Random differential homography at `(‖ω‖ deg, ‖v‖)` over a plane tilted at
/// most 60° from the optical axis.
pub fn random_h(rng: &mut ChaCha8Rng, omega_deg: f64, speed: f64) -> Homography {
    let omega = unit(rng) * omega_deg.to_radians();
    let v = unit(rng) * speed;
    let n = loop {
        let n = unit(rng);
        let n = if n.z < 0.0 { -n } else { n };
        if n.z >= 0.5 {
            break n;
        }
    };
    motion_h(omega, v, n, 1.0)
}

pub fn beta_ref(k: f64, y1: f64, y2: f64, gamma: f64, h: f64) -> f64 {
    let t1 = gamma * y1 / h;
    let t2 = 1.0 + gamma * y2 / h;
    ((t2 + 0.5 * k * t2 * t2) - (t1 + 0.5 * k * t1 * t1)) * 2.0 / (2.0 + k)
}

pub fn gs_flow_ref(h: &Homography, x: f64, y: f64) -> Vector2<f64> {
    let m = h.0;
    let r = |i: usize| m[(i, 0)] * x + m[(i, 1)] * y + m[(i, 2)];
    Vector2::new(r(0) - x * r(2), r(1) - y * r(2))
}

/// Correspondence satisfying `u = β(k, y1, y1 + u_y) · flow_gs(H, p1)` exactly.
pub fn exact_corr(h: &Homography, k: f64, gamma: f64, height: f64, p1: Pixel) -> Correspondence {
    let f = gs_flow_ref(h, p1.x, p1.y);
    let mut y2 = p1.y + f.y;
    for _ in 0..200 {
        y2 = p1.y + beta_ref(k, p1.y, y2, gamma, height) * f.y;
    }
    let b = beta_ref(k, p1.y, y2, gamma, height);
    Correspondence::new(p1, Vector2::new(b * f.x, y2 - p1.y))
}

pub fn random_pixel(rng: &mut ChaCha8Rng) -> Pixel {
    Pixel::new(rng.random_range(0.0..W - 1.0), rng.random_range(0.0..H - 1.0))
}

pub fn exact_set(
    rng: &mut ChaCha8Rng,
    h: &Homography,
    k: f64,
    gamma: f64,
    n: usize,
) -> Vec<Correspondence> {
    (0..n)
        .map(|_| exact_corr(h, k, gamma, H, random_pixel(rng)))
        .collect()
}

pub fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

pub fn add_noise(rng: &mut ChaCha8Rng, corrs: &[Correspondence], sigma: f64) -> Vec<Correspondence> {
    corrs
        .iter()
        .map(|c| {
            Correspondence::new(
                c.p1,
                c.flow + Vector2::new(sigma * gauss(rng), sigma * gauss(rng)),
            )
        })
        .collect()
}
