//! Rendering for rolling-shutter stitching: point maps between frames and
//! the rectified canvas, inverse-warp compositing with feathered blending,
//! overlap diagnostics and multi-frame chaining.

pub mod error;
pub mod mapping;
pub mod raster;
pub mod stitch;

pub use error::{Error, Result};
pub use mapping::{
    canvas_to_frame1, canvas_to_frame2, compose_forward, forward_map_rs, inverse_map_rs,
    rectify_point, rectify_point_frame2, Extent, WarpModel,
};
pub use raster::Raster;
pub use stitch::{chain_pairwise, rectify_image, warp_and_stitch, BlendMode, Canvas, CanvasMeta, StitchOptions};
