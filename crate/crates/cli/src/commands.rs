use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use log::{info, warn};
use rsstitch_core::robust::RansacParams;
use rsstitch_core::{Model, SolverKind};
use rsstitch_render::{rectify_image, warp_and_stitch, Raster, StitchOptions};
use rsstitch_synth::{canvas_rmse_ncc, eval_cdf, evaluate_checks, evaluate_holdout, holdout_split, median_of, run_sweep, SweepSpec};
use serde::Serialize;

use crate::cli::{Cli, Command, EstimationArgs, FieldArgs};
use crate::corrfile::CorrespondenceFile;
use crate::pipeline::{build_warp, estimate, Estimate, Mode};

#[derive(Debug, Clone, Serialize)]
pub struct ModelReport {
    /// `discrete` or `differential`.
    pub kind: &'static str,
    /// Row-major 3×3 matrix.
    pub h: [f64; 9],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
}

impl From<&Model> for ModelReport {
    fn from(m: &Model) -> Self {
        match m {
            Model::Discrete(h) => Self {
                kind: "discrete",
                h: h.to_row_major(),
                k: None,
                gamma: None,
            },
            Model::Differential(d) => Self {
                kind: "differential",
                h: d.h.to_row_major(),
                k: m.acceleration(),
                gamma: Some(d.rs.gamma),
            },
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualSummary {
    pub mean: f64,
    pub median: f64,
    pub max: f64,
    /// `[residual, F]` at the deciles of the inlier residuals.
    pub cdf: Vec<[f64; 2]>,
}

impl ResidualSummary {
    fn of(values: &[f64]) -> Self {
        let cdf = eval_cdf(values);
        let n = cdf.len();
        let sample = if n == 0 {
            Vec::new()
        } else {
            let mut idx: Vec<usize> = (0..=10).map(|q| ((q * n).div_ceil(10)).clamp(1, n) - 1).collect();
            idx.dedup();
            idx.into_iter().map(|i| [cdf[i].0, cdf[i].1]).collect()
        };
        Self {
            mean: if n > 0 { values.iter().sum::<f64>() / n as f64 } else { f64::NAN },
            median: median_of(values.to_vec()),
            max: values.iter().copied().fold(f64::NAN, f64::max),
            cdf: sample,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pair: Option<String>,
    pub solver: String,
    pub model: ModelReport,
    pub inliers: usize,
    pub total: usize,
    pub residuals: ResidualSummary,
    pub seed: u64,
    pub trials: usize,
}

impl SolveReport {
    fn new(est: &Estimate, pair: Option<String>, seed: u64, trials: usize) -> Self {
        let inl: Vec<f64> = est.inliers.iter().map(|&i| est.residuals[i]).collect();
        Self {
            pair,
            solver: est.solver.name().to_string(),
            model: ModelReport::from(&est.model),
            inliers: est.inliers.len(),
            total: est.residuals.len(),
            residuals: ResidualSummary::of(&inl),
            seed,
            trials,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StitchReport {
    pub mode: Mode,
    pub estimate: SolveReport,
    pub canvas: [usize; 2],
    pub offset: [f64; 2],
    /// Overlap RMSE of `1 - NCC`; absent when the sources do not overlap.
    pub rmse_ncc: Option<f64>,
    pub warnings: Vec<String>,
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

fn emit(text: &str, output: Option<&Path>) -> Result<()> {
    match output {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

pub fn solve(corr: &Path, est: &EstimationArgs) -> Result<SolveReport> {
    let file = CorrespondenceFile::load(corr)?;
    let cfg = est.config(file.gamma, None);
    let e = estimate(&file.corrs, file.height, &cfg)?;
    Ok(SolveReport::new(&e, file.pair, cfg.seed, cfg.trials))
}

fn load_image(path: &Path) -> Result<Raster> {
    Raster::load_png(path).with_context(|| format!("reading image {}", path.display()))
}

fn check_dims(img: &Raster, file: &CorrespondenceFile, path: &Path) -> Result<()> {
    if img.width() != file.width || img.height() != file.height {
        bail!(
            "{} is {}×{} but the correspondences declare {}×{}",
            path.display(),
            img.width(),
            img.height(),
            file.width,
            file.height
        );
    }
    Ok(())
}

pub fn stitch(
    img1: &Path,
    img2: &Path,
    corr: &Path,
    mode: Mode,
    est: &EstimationArgs,
    field: &FieldArgs,
    output: &Path,
) -> Result<StitchReport> {
    let a = load_image(img1)?;
    let b = load_image(img2)?;
    let file = CorrespondenceFile::load(corr)?;
    check_dims(&a, &file, img1)?;
    check_dims(&b, &file, img2)?;
    let cfg = est.config(file.gamma, Some(field));
    let (warp, e) = build_warp(&file.corrs, file.width, file.height, mode, &cfg)?;
    let opts = StitchOptions {
        rectify: mode.rectify(),
        ..StitchOptions::default()
    };
    let canvas = warp_and_stitch(&a, &b, &warp, &opts).context("rendering")?;
    canvas.image.save_png(output).context("writing canvas")?;
    canvas.diff.save_png(sibling(output, ".diff.png")).context("writing overlap diagnostic")?;
    canvas.write_sidecar(sibling(output, ".json"), opts.rectify).context("writing canvas metadata")?;
    for w in &canvas.warnings {
        warn!("{w}");
    }
    Ok(StitchReport {
        mode,
        estimate: SolveReport::new(&e, file.pair, cfg.seed, cfg.trials),
        canvas: [canvas.width(), canvas.height()],
        offset: [canvas.offset.0, canvas.offset.1],
        rmse_ncc: canvas_rmse_ncc(&canvas).ok(),
        warnings: canvas.warnings.clone(),
    })
}

pub fn rectify(img: &Path, corr: &Path, mode: Mode, est: &EstimationArgs, field: &FieldArgs, output: &Path) -> Result<SolveReport> {
    if !matches!(mode, Mode::Rs | Mode::RsApap) {
        bail!("rectification needs mode `rs` or `rs-apap`, got `{}`", mode.name());
    }
    let a = load_image(img)?;
    let file = CorrespondenceFile::load(corr)?;
    check_dims(&a, &file, img)?;
    let cfg = est.config(file.gamma, Some(field));
    if cfg.gamma == 0.0 {
        warn!("gamma is 0: every scanline shares one pose and rectification leaves the image unchanged");
    }
    let (warp, e) = build_warp(&file.corrs, file.width, file.height, mode, &cfg)?;
    let canvas = rectify_image(&a, &warp, &StitchOptions::default()).context("rendering")?;
    canvas.image.save_png(output).context("writing rectified image")?;
    canvas.image.mask_raster().save_png(sibling(output, ".mask.png")).context("writing mask")?;
    canvas.write_sidecar(sibling(output, ".json"), true).context("writing canvas metadata")?;
    Ok(SolveReport::new(&e, file.pair, cfg.seed, cfg.trials))
}

/// Returns `true` when every check passed.
pub fn bench(spec: &Path, output: Option<&Path>, seed: Option<u64>) -> Result<bool> {
    let text = std::fs::read_to_string(spec).with_context(|| format!("reading {}", spec.display()))?;
    let mut s = SweepSpec::from_toml(&text).with_context(|| format!("{}", spec.display()))?;
    if let Some(seed) = seed {
        s.seed = seed;
    }
    info!("{} sweep over {} values × {} configs", s.param.name(), s.values.len(), s.configs);
    let table = run_sweep(&s)?;
    emit(&table.to_csv(), output)?;
    let mut ok = true;
    for o in evaluate_checks(&s, &table) {
        eprintln!("{} {}: {}", if o.passed { "PASS" } else { "FAIL" }, check_name(&o.check), o.detail);
        ok &= o.passed;
    }
    Ok(ok)
}

fn check_name(c: &rsstitch_synth::Check) -> String {
    serde_json::to_string(c).unwrap_or_default()
}

pub fn eval(files: &[PathBuf], est: &EstimationArgs, holdout: usize) -> Result<String> {
    let mut medians = Vec::with_capacity(files.len());
    for (i, path) in files.iter().enumerate() {
        let file = CorrespondenceFile::load(path)?;
        let cfg = est.config(file.gamma, None);
        let m = if holdout > 0 {
            let (_, test) = holdout_split(file.corrs.len(), holdout, cfg.seed ^ i as u64)?;
            let mut params = RansacParams::new(cfg.solver)
                .with_trials(cfg.trials)
                .with_threshold(cfg.threshold)
                .with_seed(cfg.seed);
            params.k_range = cfg.k_range;
            let solver = if cfg.solver == SolverKind::RsConstAcc && cfg.gamma == 0.0 {
                SolverKind::RsConstVel
            } else {
                cfg.solver
            };
            evaluate_holdout(&file.corrs, &test, solver, &params, cfg.rs(file.height)?)
                .with_context(|| format!("{}", path.display()))?
                .test_median
        } else {
            let e = estimate(&file.corrs, file.height, &cfg).with_context(|| format!("{}", path.display()))?;
            median_of(e.inliers.iter().map(|&i| e.residuals[i]).collect())
        };
        medians.push(m);
    }
    let mut out = String::from("median_px,cdf\n");
    for (m, f) in eval_cdf(&medians) {
        out.push_str(&format!("{m:.9e},{f}\n"));
    }
    Ok(out)
}

/// Runs a parsed command line; the returned code is the process exit status.
pub fn run(cli: Cli) -> Result<u8> {
    if let Some(n) = cli.threads {
        if rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
            warn!("thread pool already initialised; ignoring --threads");
        }
    }
    match cli.command {
        Command::Solve { corr, est, output } => emit(&json(&solve(&corr, &est)?), output.as_deref())?,
        Command::Stitch {
            img1,
            img2,
            corr,
            mode,
            est,
            field,
            output,
        } => print!("{}", json(&stitch(&img1, &img2, &corr, mode, &est, &field, &output)?)),
        Command::Rectify {
            img,
            corr,
            mode,
            est,
            field,
            output,
        } => print!("{}", json(&rectify(&img, &corr, mode, &est, &field, &output)?)),
        Command::Bench { spec, output, seed } => {
            if !bench(&spec, output.as_deref(), seed)? {
                return Ok(1);
            }
        }
        Command::Eval {
            corr,
            est,
            holdout,
            output,
        } => emit(&eval(&corr, &est, holdout)?, output.as_deref())?,
    }
    Ok(0)
}
