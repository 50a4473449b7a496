//! Rolling-shutter-aware homography estimation.
//!
//! Two consecutive video frames from a rolling-shutter camera are related by
//! a differential homography `H` whose flow field is scaled per scanline:
//!
//! ```text
//! u = β(k, y1, y2) · [(I - x̂e₃ᵀ) H x̂]_xy
//! ```
//!
//! where `β` interpolates the camera pose across scanlines under constant
//! acceleration `k`. This crate provides the geometry ([`geometry`], [`rs`],
//! [`flow`]), normalization, minimal and least-squares solvers
//! ([`solvers`]), RANSAC ([`robust`]) and spatially-varying warp fields
//! ([`warpfield`]).
//!
//! All routines are generic over [`Real`] (`f32` or `f64`); the aliases at the
//! crate root fix the scalar to `f64`.

pub mod error;
pub mod flow;
pub mod geometry;
pub mod normalize;
pub mod robust;
pub mod rs;
pub mod scalar;
pub mod solvers;
pub mod warpfield;

pub use error::{Error, Result};
pub use flow::{flow_coeff_rows, flow_gs, flow_jacobian, flow_rs};
pub use normalize::{hartley_normalize, normalize_points, Similarity};
pub use robust::{
    ransac, refit, residual_gs_disc, residual_rs, RansacParams, RobustEstimate, SolverKind,
};
pub use rs::{beta, beta1, beta2};
pub use scalar::Real;
pub use solvers::KRange;
pub use warpfield::{build_apap_field, weight, FieldMode, WeightParams};

pub type Pixel = geometry::Pixel<f64>;
pub type Correspondence = geometry::Correspondence<f64>;
pub type Homography = geometry::Homography<f64>;
pub type RsParams = geometry::RsParams<f64>;
pub type RsDiffModel = geometry::RsDiffModel<f64>;
pub type MotionSpec = geometry::MotionSpec<f64>;
pub type Plane = geometry::Plane<f64>;
pub type Model = robust::Model<f64>;
pub type WarpField = warpfield::WarpField<f64>;

pub type Pixel32 = geometry::Pixel<f32>;
pub type Correspondence32 = geometry::Correspondence<f32>;
pub type Homography32 = geometry::Homography<f32>;
pub type RsParams32 = geometry::RsParams<f32>;
pub type RsDiffModel32 = geometry::RsDiffModel<f32>;
