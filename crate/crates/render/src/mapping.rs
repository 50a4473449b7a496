//! Point maps between frame 1, frame 2 and the rectified global-shutter
//! canvas (the pose of the first scanline of frame 1).
//!
//! Under a rolling-shutter model a frame-1 point `x1` and its frame-2 match
//! `x2` satisfy
//!
//! ```text
//! x2 = x1 + (β₂(k, y2) - β₁(k, y1)) · F(x1),   F = flow_gs(H, ·)
//! ```
//!
//! which is quadratic in `y2`. Rectification inverts `x1 = x_g + β₁(k, y1) ·
//! F(x_g)` for the canvas point `x_g` by Newton iteration.

use nalgebra::{Matrix2, Vector2};
use rsstitch_core::flow::{flow_gs, flow_jacobian};
use rsstitch_core::rs::{beta1_unchecked, beta2_unchecked};
use rsstitch_core::{Homography, Model, Pixel, RsDiffModel, WarpField};

const NEWTON_STEP_TOL: f64 = 1e-8;
const NEWTON_MAX_ITER: usize = 20;

/// Image size used for range checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extent {
    pub width: f64,
    pub height: f64,
}

impl Extent {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width: width as f64,
            height: height as f64,
        }
    }

    pub fn diagonal(&self) -> f64 {
        self.width.hypot(self.height)
    }
}

/// Real root of `a y² + b y + c = 0` closest to `target`.
fn quadratic_root_near(a: f64, b: f64, c: f64, target: f64) -> Option<f64> {
    if a == 0.0 {
        return if b == 0.0 { None } else { Some(-c / b) };
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return None;
    }
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    if q == 0.0 {
        return Some(0.0);
    }
    let (r1, r2) = (q / a, c / q);
    Some(if (r1 - target).abs() <= (r2 - target).abs() { r1 } else { r2 })
}

/// Coefficients of `c·(a·y + ½k a² y²)` and of `c·(t + ½k t²)`, `t = 1 + a y`,
/// as polynomials in `y`: returns `(β₁ quadratic, β₁ linear, β₂ quadratic,
/// β₂ linear, β₂ constant)`.
fn beta_polys(m: &RsDiffModel) -> (f64, f64, f64, f64, f64) {
    let a = m.rs.line_rate();
    let k = m.k;
    let c = 2.0 / (2.0 + k);
    (
        0.5 * k * a * a * c,
        a * c,
        0.5 * k * a * a * c,
        a * (1.0 + k) * c,
        1.0,
    )
}

fn in_scan_range(y: f64, h: f64) -> bool {
    y >= -0.5 * h && y <= 1.5 * h
}

/// Frame-2 position of `p1` under an RS model, or `None` when the scanline
/// equation has no admissible root.
pub fn forward_map_rs(model: &RsDiffModel, p1: Pixel) -> Option<Pixel> {
    let f = flow_gs(&model.h, p1);
    let b1 = beta1_unchecked(model.k, p1.y, &model.rs);
    let (_, _, q2, l2, c2) = beta_polys(model);
    // y2 = y1 + (β₂(y2) - β₁) f_y
    let y2 = quadratic_root_near(f.y * q2, f.y * l2 - 1.0, p1.y + f.y * (c2 - b1), p1.y + f.y)?;
    if !y2.is_finite() || !in_scan_range(y2, model.rs.height) {
        return None;
    }
    let beta = beta2_unchecked(model.k, y2, &model.rs) - b1;
    Some(Pixel::new(p1.x + beta * f.x, y2))
}

/// Newton solve of `x = x_g + b · F(x_g)` for `x_g` with `b` fixed.
fn undo_scaled_flow(h: &Homography, x: Pixel, b: f64, extent: &Extent) -> Option<Pixel> {
    if b == 0.0 {
        return Some(x);
    }
    let target = x.to_vector();
    let mut g = target - flow_gs(h, x) * b;
    let limit = 2.0 * extent.diagonal();
    for _ in 0..NEWTON_MAX_ITER {
        let gp = Pixel::from_vector(&g);
        let r = g + flow_gs(h, gp) * b - target;
        let j = Matrix2::identity() + flow_jacobian(h, gp) * b;
        let step = j.lu().solve(&r)?;
        g -= step;
        if !(g - target).norm().is_finite() || (g - target).norm() > limit {
            return None;
        }
        if step.norm() < NEWTON_STEP_TOL {
            return Some(Pixel::from_vector(&g));
        }
    }
    None
}

/// Rectified canvas position of frame-1 point `p1`.
pub fn rectify_point(model: &RsDiffModel, p1: Pixel, extent: &Extent) -> Option<Pixel> {
    let b = beta1_unchecked(model.k, p1.y, &model.rs);
    undo_scaled_flow(&model.h, p1, b, extent)
}

/// Rectified canvas position of frame-2 point `p2`.
pub fn rectify_point_frame2(model: &RsDiffModel, p2: Pixel, extent: &Extent) -> Option<Pixel> {
    let b = beta2_unchecked(model.k, p2.y, &model.rs);
    undo_scaled_flow(&model.h, p2, b, extent)
}

/// Frame-1 point imaging canvas point `g`: solves the scanline quadratic of
/// `x1 = g + β₁(k, y1) F(g)`.
pub fn canvas_to_frame1(model: &RsDiffModel, g: Pixel) -> Option<Pixel> {
    let f = flow_gs(&model.h, g);
    let (q1, l1, ..) = beta_polys(model);
    let y1 = quadratic_root_near(f.y * q1, f.y * l1 - 1.0, g.y, g.y)?;
    if !y1.is_finite() || !in_scan_range(y1, model.rs.height) {
        return None;
    }
    let b = beta1_unchecked(model.k, y1, &model.rs);
    Some(Pixel::new(g.x + b * f.x, y1))
}

/// Frame-2 point imaging canvas point `g`: solves the scanline quadratic of
/// `x2 = g + β₂(k, y2) F(g)`.
pub fn canvas_to_frame2(model: &RsDiffModel, g: Pixel) -> Option<Pixel> {
    let f = flow_gs(&model.h, g);
    let (_, _, q2, l2, c2) = beta_polys(model);
    let y2 = quadratic_root_near(f.y * q2, f.y * l2 - 1.0, g.y + f.y * c2, g.y + f.y)?;
    if !y2.is_finite() || !in_scan_range(y2, model.rs.height) {
        return None;
    }
    let b = beta2_unchecked(model.k, y2, &model.rs);
    Some(Pixel::new(g.x + b * f.x, y2))
}

/// Frame-1 preimage of frame-2 point `q`.
///
/// With `y2 = q.y` known, `q = p + (β₂(y2) - β₁(p.y)) F(p)` is solved for `p`
/// by Newton from the global-shutter guess `q - F(q)`.
pub fn inverse_map_rs(model: &RsDiffModel, q: Pixel, extent: &Extent) -> Option<Pixel> {
    inverse_with(|_| *model, q, extent)
}

fn inverse_with(local: impl Fn(Pixel) -> RsDiffModel, q: Pixel, extent: &Extent) -> Option<Pixel> {
    let target = q.to_vector();
    let m0 = local(q);
    let mut p = target - flow_gs(&m0.h, q);
    let limit = 2.0 * extent.diagonal();
    for _ in 0..NEWTON_MAX_ITER + 10 {
        let pp = Pixel::from_vector(&p);
        let m = local(pp);
        let (q1, l1, ..) = beta_polys(&m);
        let b2 = beta2_unchecked(m.k, q.y, &m.rs);
        let b1 = beta1_unchecked(m.k, pp.y, &m.rs);
        let f = flow_gs(&m.h, pp);
        let r = p + f * (b2 - b1) - target;
        let db1 = l1 + 2.0 * q1 * pp.y;
        let mut j = Matrix2::identity() + flow_jacobian(&m.h, pp) * (b2 - b1);
        j[(0, 1)] -= f.x * db1;
        j[(1, 1)] -= f.y * db1;
        let step = j.lu().solve(&r)?;
        p -= step;
        if !p.norm().is_finite() || (p - target).norm() > limit {
            return None;
        }
        if step.norm() < NEWTON_STEP_TOL {
            let pp = Pixel::from_vector(&p);
            let back = forward_map_rs(&local(pp), pp)?;
            return ((back.to_vector() - target).norm() <= 1e-6).then_some(pp);
        }
    }
    None
}

fn apply_discrete(h: &Homography, p: Pixel) -> Option<Pixel> {
    let q = h.matrix() * p.homogeneous();
    if q.z.abs() <= 1e-12 * q.norm() {
        return None;
    }
    let out = Pixel::new(q.x / q.z, q.y / q.z);
    out.is_finite().then_some(out)
}

/// Any model that maps frame 1 into frame 2.
#[derive(Debug, Clone)]
pub enum WarpModel {
    Discrete(Homography),
    Rs(RsDiffModel),
    Field(WarpField),
}

impl From<Model> for WarpModel {
    fn from(m: Model) -> Self {
        match m {
            Model::Discrete(h) => WarpModel::Discrete(h),
            Model::Differential(d) => WarpModel::Rs(d),
        }
    }
}

impl From<WarpField> for WarpModel {
    fn from(f: WarpField) -> Self {
        WarpModel::Field(f)
    }
}

impl WarpModel {
    pub fn identity() -> Self {
        WarpModel::Discrete(Homography::identity())
    }

    /// Model governing the neighborhood of `p`.
    pub fn local(&self, p: Pixel) -> Model {
        match self {
            WarpModel::Discrete(h) => Model::Discrete(*h),
            WarpModel::Rs(m) => Model::Differential(*m),
            WarpModel::Field(f) => f.model_at(p),
        }
    }

    /// `true` when the model has a rolling-shutter component to rectify.
    pub fn is_rolling_shutter(&self) -> bool {
        match self {
            WarpModel::Discrete(_) => false,
            WarpModel::Rs(m) => m.rs.gamma > 0.0,
            WarpModel::Field(f) => f.rs.gamma > 0.0 && f.kind != rsstitch_core::warpfield::FieldKind::GsDiscrete,
        }
    }

    pub fn forward(&self, p1: Pixel) -> Option<Pixel> {
        match self.local(p1) {
            Model::Discrete(h) => apply_discrete(&h, p1),
            Model::Differential(m) => forward_map_rs(&m, p1),
        }
    }

    /// Frame-1 preimage of frame-2 point `q`.
    pub fn inverse(&self, q: Pixel, extent: &Extent) -> Option<Pixel> {
        match self {
            WarpModel::Discrete(h) => apply_discrete(&Homography::new(h.matrix().try_inverse()?), q),
            WarpModel::Rs(m) => inverse_map_rs(m, q, extent),
            WarpModel::Field(f) => match f.kind {
                rsstitch_core::warpfield::FieldKind::GsDiscrete => {
                    // fixed point over cells: the cell holding the preimage
                    let mut p = q;
                    for _ in 0..4 {
                        let Model::Discrete(h) = f.model_at(p) else { unreachable!() };
                        let next = apply_discrete(&Homography::new(h.matrix().try_inverse()?), q)?;
                        if next == p {
                            break;
                        }
                        p = next;
                    }
                    let back = self.forward(p)?;
                    ((back.to_vector() - q.to_vector()).norm() <= 1e-6).then_some(p)
                }
                _ => inverse_with(
                    |p| match f.model_at(p) {
                        Model::Differential(m) => m,
                        Model::Discrete(_) => unreachable!(),
                    },
                    q,
                    extent,
                ),
            },
        }
    }

    /// Frame-1 point to the rectified canvas; identity for global-shutter models.
    pub fn rectify(&self, p1: Pixel, extent: &Extent) -> Option<Pixel> {
        match self.local(p1) {
            Model::Discrete(_) => Some(p1),
            Model::Differential(m) => rectify_point(&m, p1, extent),
        }
    }

    /// Frame-2 point to the rectified canvas.
    pub fn rectify_frame2(&self, p2: Pixel, extent: &Extent) -> Option<Pixel> {
        match self {
            WarpModel::Discrete(h) => self.inverse(p2, extent).or_else(|| apply_discrete(h, p2)),
            WarpModel::Rs(m) => rectify_point_frame2(m, p2, extent),
            WarpModel::Field(_) => {
                let p1 = self.inverse(p2, extent)?;
                match self.local(p1) {
                    Model::Differential(m) => rectify_point_frame2(&m, p2, extent),
                    Model::Discrete(_) => Some(p1),
                }
            }
        }
    }

    pub fn canvas_to_frame1(&self, g: Pixel) -> Option<Pixel> {
        match self.local(g) {
            Model::Discrete(_) => Some(g),
            Model::Differential(m) => canvas_to_frame1(&m, g),
        }
    }

    pub fn canvas_to_frame2(&self, g: Pixel) -> Option<Pixel> {
        match self.local(g) {
            Model::Discrete(h) => apply_discrete(&h, g),
            Model::Differential(m) => canvas_to_frame2(&m, g),
        }
    }
}

/// Applies `models[0]`, then `models[1]`, ... to `p`.
pub fn compose_forward(models: &[WarpModel], p: Pixel) -> Option<Pixel> {
    models.iter().try_fold(p, |q, m| m.forward(q))
}

/// Residual of the forward relation at a mapped pair, in pixels.
pub fn forward_residual(model: &RsDiffModel, p1: Pixel, p2: Pixel) -> f64 {
    let beta = beta2_unchecked(model.k, p2.y, &model.rs) - beta1_unchecked(model.k, p1.y, &model.rs);
    (p2.to_vector() - p1.to_vector() - flow_gs(&model.h, p1) * beta).norm()
}

/// Residual of the rectification relation `x1 = x_g + β₁(k, y1) F(x_g)`.
pub fn rectify_residual(model: &RsDiffModel, p1: Pixel, g: Pixel) -> f64 {
    let b = beta1_unchecked(model.k, p1.y, &model.rs);
    (p1.to_vector() - g.to_vector() - flow_gs(&model.h, g) * b).norm()
}

/// Displacement helper used by tests and diagnostics.
pub fn displacement(a: Pixel, b: Pixel) -> Vector2<f64> {
    b.to_vector() - a.to_vector()
}
