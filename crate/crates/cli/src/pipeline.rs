//! Estimation and warp construction shared by the subcommands.

use std::str::FromStr;

use anyhow::{bail, Context, Result};
use rsstitch_core::robust::{ransac, refit, RansacParams, SolverKind};
use rsstitch_core::warpfield::FieldMode;
use rsstitch_core::{build_apap_field, Correspondence, KRange, Model, RsParams, WeightParams};
use rsstitch_render::WarpModel;
use serde::Serialize;

/// Named stitching variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// One discrete homography.
    Gs,
    /// Spatially varying discrete homographies.
    Apap,
    /// One rolling-shutter differential model.
    Rs,
    /// Spatially varying rolling-shutter models with shared acceleration.
    RsApap,
    /// `rs-apap` rendered on the rectified canvas of frame 1.
    RsApapRectify,
}

impl Mode {
    pub fn solver(self) -> SolverKind {
        match self {
            Mode::Gs | Mode::Apap => SolverKind::GsDiscrete,
            _ => SolverKind::RsConstAcc,
        }
    }

    pub fn rectify(self) -> bool {
        self == Mode::RsApapRectify
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::Gs => "gs",
            Mode::Apap => "apap",
            Mode::Rs => "rs",
            Mode::RsApap => "rs-apap",
            Mode::RsApapRectify => "rs-apap-rectify",
        }
    }
}

/// Estimation settings common to all commands.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub solver: SolverKind,
    pub trials: usize,
    pub threshold: f64,
    pub seed: u64,
    pub gamma: f64,
    pub k_range: KRange<f64>,
    /// Least-squares polish on the RANSAC inliers.
    pub refit: bool,
    /// APAP Gaussian scale; `0.1 × diagonal` when absent.
    pub sigma: Option<f64>,
    pub tau: f64,
    pub cell: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            solver: SolverKind::RsConstAcc,
            trials: 1000,
            threshold: 1.0,
            seed: 0,
            gamma: 1.0,
            k_range: KRange::default(),
            refit: true,
            sigma: None,
            tau: 0.0025,
            cell: 40,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            bail!("gamma {} outside [0, 1]", self.gamma);
        }
        if !(self.threshold > 0.0) {
            bail!("threshold must be positive");
        }
        if self.trials == 0 {
            bail!("at least one RANSAC trial is needed");
        }
        Ok(())
    }

    pub fn rs(&self, height: usize) -> Result<RsParams> {
        Ok(RsParams::new(self.gamma, height as f64)?)
    }

    pub fn weights(&self, width: usize, height: usize) -> Result<WeightParams<f64>> {
        let base = WeightParams::for_image(width, height);
        Ok(WeightParams::new(self.sigma.unwrap_or(base.sigma), self.tau, self.cell)?)
    }
}

/// Parses `lo,hi`.
pub fn parse_k_range(s: &str) -> std::result::Result<KRange<f64>, String> {
    let (a, b) = s.split_once(',').ok_or("expected `lo,hi`")?;
    let lo = f64::from_str(a.trim()).map_err(|e| e.to_string())?;
    let hi = f64::from_str(b.trim()).map_err(|e| e.to_string())?;
    KRange::new(lo, hi).map_err(|e| e.to_string())
}

#[derive(Debug, Clone)]
pub struct Estimate {
    pub solver: SolverKind,
    pub model: Model,
    pub inliers: Vec<usize>,
    /// Residual of every correspondence under `model`.
    pub residuals: Vec<f64>,
}

/// RANSAC followed by an optional inlier refit.
///
/// With `γ = 0` the acceleration has no effect on the model, so the
/// constant-acceleration solver is replaced by the constant-velocity one.
pub fn estimate(corrs: &[Correspondence], height: usize, cfg: &RunConfig) -> Result<Estimate> {
    cfg.validate()?;
    let rs = cfg.rs(height)?;
    let mut kind = cfg.solver;
    if kind == SolverKind::RsConstAcc && cfg.gamma == 0.0 {
        kind = SolverKind::RsConstVel;
    }
    if corrs.len() < kind.minimal_sample() {
        bail!(
            "{kind} needs at least {} correspondences, file has {}",
            kind.minimal_sample(),
            corrs.len()
        );
    }
    let mut params = RansacParams::new(kind)
        .with_trials(cfg.trials)
        .with_threshold(cfg.threshold)
        .with_seed(cfg.seed);
    params.k_range = cfg.k_range;
    let est = match ransac(corrs, kind, &params, rs) {
        Ok(e) => e,
        // the 5-point system degenerates without motion; k is then moot
        Err(e) if kind == SolverKind::RsConstAcc => {
            log::warn!("{e}; falling back to the constant-velocity model");
            kind = SolverKind::RsConstVel;
            let mut p = RansacParams::new(kind)
                .with_trials(cfg.trials)
                .with_threshold(cfg.threshold)
                .with_seed(cfg.seed);
            p.k_range = cfg.k_range;
            ransac(corrs, kind, &p, rs).context("RANSAC")?
        }
        Err(e) => return Err(e).context("RANSAC"),
    };
    let mut model = est.model;
    if cfg.refit {
        let inl: Vec<Correspondence> = est.inliers.iter().map(|&i| corrs[i]).collect();
        if let Ok(m) = refit(kind, &model, &inl, rs, cfg.k_range) {
            model = m;
        }
    }
    let residuals: Vec<f64> = corrs.iter().map(|c| model.residual(c)).collect();
    let inliers = residuals
        .iter()
        .enumerate()
        .filter(|(_, r)| **r <= cfg.threshold)
        .map(|(i, _)| i)
        .collect();
    Ok(Estimate {
        solver: kind,
        model,
        inliers,
        residuals,
    })
}

/// Estimation plus, for the APAP modes, a warp field over the inliers.
pub fn build_warp(
    corrs: &[Correspondence],
    width: usize,
    height: usize,
    mode: Mode,
    cfg: &RunConfig,
) -> Result<(WarpModel, Estimate)> {
    let cfg = RunConfig {
        solver: mode.solver(),
        ..cfg.clone()
    };
    let est = estimate(corrs, height, &cfg).context("estimation")?;
    let inliers: Vec<Correspondence> = est.inliers.iter().map(|&i| corrs[i]).collect();
    let warp = match mode {
        Mode::Gs | Mode::Rs => WarpModel::from(est.model),
        Mode::Apap | Mode::RsApap | Mode::RsApapRectify => {
            let field_mode = match est.model {
                Model::Discrete(_) => FieldMode::GsDiscrete,
                Model::Differential(m) => FieldMode::RsDifferential { k: m.k },
            };
            let wp = cfg.weights(width, height)?;
            let field = build_apap_field(&inliers, field_mode, wp, width, height, cfg.rs(height)?)
                .context("warp field")?;
            WarpModel::Field(field)
        }
    };
    Ok((warp, est))
}
