//! Synthetic rolling-shutter scenes and benchmark sweeps.

pub mod camera;
pub mod error;
pub mod metrics;
pub mod project;
pub mod scene;
pub mod sweep;
pub mod texture;

pub use camera::CameraConfig;
pub use error::{Error, Result};
pub use project::{project_rs, Frame, Projection};
pub use scene::{gen_correspondences, CorrespondenceSet, Generator, SceneConfig, SceneFile, SyntheticScene};
pub use metrics::{canvas_rmse_ncc, cdf_at, eval_cdf, evaluate_holdout, holdout_split, median_of, rmse_ncc, HoldoutReport};
pub use texture::{render_pair, Exposure, PlaneRenderer, Texture};
pub use sweep::{evaluate_checks, run_sweep, BenchSolver, Check, CheckOutcome, FitMode, SweepParam, SweepSpec, SweepTable};
