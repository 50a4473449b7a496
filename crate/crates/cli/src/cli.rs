use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rsstitch_core::{KRange, SolverKind};

use crate::pipeline::{parse_k_range, Mode, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "rsstitch", version, about = "Rolling-shutter aware homography estimation and stitching")]
pub struct Cli {
    /// Worker threads; defaults to one per core.
    #[arg(long, global = true, env = "RSSTITCH_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate a model from a correspondence file and print a JSON report.
    Solve {
        corr: PathBuf,
        #[command(flatten)]
        est: EstimationArgs,
        /// Write the report here instead of stdout.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Warp the first image onto the second and blend.
    Stitch {
        img1: PathBuf,
        img2: PathBuf,
        corr: PathBuf,
        #[arg(long, value_enum, default_value = "rs-apap")]
        mode: Mode,
        #[command(flatten)]
        est: EstimationArgs,
        #[command(flatten)]
        field: FieldArgs,
        /// Canvas PNG; the overlap diagnostic and metadata are written next
        /// to it as `<stem>.diff.png` and `<stem>.json`.
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Resample an image onto the global-shutter canvas of its first scanline.
    Rectify {
        img: PathBuf,
        /// Correspondences from this image to the next frame.
        corr: PathBuf,
        /// `rs` or `rs-apap`.
        #[arg(long, value_enum, default_value = "rs")]
        mode: Mode,
        #[command(flatten)]
        est: EstimationArgs,
        #[command(flatten)]
        field: FieldArgs,
        /// Rectified PNG; the validity mask goes to `<stem>.mask.png`.
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Run a synthetic sweep; exits non-zero if a check in the spec fails.
    Bench {
        spec: PathBuf,
        /// CSV destination; stdout when absent.
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Overrides the spec's master seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Median residual per correspondence file and their empirical CDF.
    Eval {
        #[arg(required = true)]
        corr: Vec<PathBuf>,
        #[command(flatten)]
        est: EstimationArgs,
        /// Correspondences per file reserved for scoring only.
        #[arg(long, default_value_t = 0)]
        holdout: usize,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Args)]
pub struct EstimationArgs {
    /// gs-disc, gs-diff, rs-constvel or rs-constacc. Ignored by `stitch`
    /// and `rectify`, where the mode decides.
    #[arg(long, default_value = "rs-constacc")]
    pub solver: SolverKind,
    /// Readout time ratio; overrides the file header.
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    /// Inlier threshold in pixels.
    #[arg(long, default_value_t = 1.0)]
    pub threshold: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Admissible acceleration interval, `lo,hi`.
    #[arg(long, value_parser = parse_k_range, default_value = "-1.9,10")]
    pub k_range: KRange<f64>,
    /// Skip the least-squares refit on the inliers.
    #[arg(long)]
    pub no_refit: bool,
}

#[derive(Debug, Clone, Args)]
pub struct FieldArgs {
    /// Gaussian scale of the local weights in pixels (default 0.1 × diagonal).
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Weight floor.
    #[arg(long, default_value_t = 0.0025)]
    pub tau: f64,
    /// Grid cell size in pixels.
    #[arg(long, default_value_t = 40)]
    pub cell: usize,
}

impl EstimationArgs {
    /// Settings with `γ` from the flag, else the file header, else 1.
    pub fn config(&self, header_gamma: Option<f64>, field: Option<&FieldArgs>) -> RunConfig {
        let mut cfg = RunConfig {
            solver: self.solver,
            trials: self.trials,
            threshold: self.threshold,
            seed: self.seed,
            gamma: self.gamma.or(header_gamma).unwrap_or(1.0),
            k_range: self.k_range,
            refit: !self.no_refit,
            ..RunConfig::default()
        };
        if let Some(f) = field {
            cfg.sigma = f.sigma;
            cfg.tau = f.tau;
            cfg.cell = f.cell;
        }
        cfg
    }
}
