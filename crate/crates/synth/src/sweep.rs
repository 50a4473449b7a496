//! Parameter sweeps over random synthetic scenes.
//!
//! A sweep varies one of γ, ‖ω‖, ‖v‖ or k, draws `configs` random scenes per
//! value, fits every requested solver and reports the mean transfer error
//! against the noise-free correspondences. Randomness derives from a single
//! master seed; scene `c` uses the same directions and plane at every sweep
//! value, so curves differ only through the swept parameter.

use std::fmt::Write as _;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rsstitch_core::robust::{fit_candidates, ransac, refit, residual_gs_disc, RansacParams, SolverKind};
use rsstitch_core::{Correspondence, KRange, Model, RsParams};
use rsstitch_render::forward_map_rs;
use serde::{Deserialize, Serialize};

use crate::camera::CameraConfig;
use crate::error::{Error, Result};
use crate::scene::{gen_correspondences, Generator, SceneConfig, SyntheticScene};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParam {
    Gamma,
    Omega,
    Speed,
    K,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Gamma => "gamma",
            SweepParam::Omega => "omega",
            SweepParam::Speed => "speed",
            SweepParam::K => "k",
        }
    }
}

/// Solvers and protocol variants compared by the benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BenchSolver {
    #[serde(rename = "gs-disc")]
    GsDisc,
    #[serde(rename = "gs-diff")]
    GsDiff,
    #[serde(rename = "rs-constvel")]
    RsConstVel,
    #[serde(rename = "rs-constacc")]
    RsConstAcc,
    /// Discrete homography from 5-point RANSAC samples.
    #[serde(rename = "gs-5point")]
    Gs5Point,
    /// Discrete homography with 25% more RANSAC trials.
    #[serde(rename = "gs-moretrials")]
    GsMoreTrials,
}

impl BenchSolver {
    pub fn name(self) -> &'static str {
        match self {
            BenchSolver::GsDisc => "gs-disc",
            BenchSolver::GsDiff => "gs-diff",
            BenchSolver::RsConstVel => "rs-constvel",
            BenchSolver::RsConstAcc => "rs-constacc",
            BenchSolver::Gs5Point => "gs-5point",
            BenchSolver::GsMoreTrials => "gs-moretrials",
        }
    }

    pub fn kind(self) -> SolverKind {
        match self {
            BenchSolver::GsDisc | BenchSolver::Gs5Point | BenchSolver::GsMoreTrials => SolverKind::GsDiscrete,
            BenchSolver::GsDiff => SolverKind::GsDiff,
            BenchSolver::RsConstVel => SolverKind::RsConstVel,
            BenchSolver::RsConstAcc => SolverKind::RsConstAcc,
        }
    }
}

impl FromStr for BenchSolver {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.into()))
            .map_err(|_| Error::Spec(format!("unknown solver `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitMode {
    /// Least squares on all points when noise-free, RANSAC otherwise.
    #[default]
    Auto,
    Lsq,
    Ransac,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RansacSpec {
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Inlier threshold in pixels; `max(1, 3σ)` when absent.
    #[serde(default)]
    pub threshold: Option<f64>,
}

impl Default for RansacSpec {
    fn default() -> Self {
        Self {
            trials: default_trials(),
            threshold: None,
        }
    }
}

fn default_trials() -> usize {
    1000
}
fn default_omega() -> f64 {
    3.0
}
fn default_speed() -> f64 {
    0.03
}
fn default_gamma() -> f64 {
    1.0
}
fn default_sigma() -> Vec<f64> {
    vec![0.0]
}
fn default_configs() -> usize {
    100
}
fn default_points() -> usize {
    100
}
fn default_generator() -> Generator {
    Generator::Physical
}

/// A pass/fail condition on the sweep table, evaluated by [`evaluate_checks`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Check {
    /// `mean(lhs) ≤ mean(rhs)` (or `<` when `strict`) at every sweep value
    /// in `[min_value, max_value]`.
    LessEqual {
        lhs: BenchSolver,
        rhs: BenchSolver,
        sigma_g: f64,
        #[serde(default)]
        min_value: Option<f64>,
        #[serde(default)]
        max_value: Option<f64>,
        #[serde(default)]
        strict: bool,
    },
    /// `mean(solver @ numerator) / mean(solver @ denominator) ≥ ratio`.
    RatioAtLeast {
        solver: BenchSolver,
        sigma_g: f64,
        numerator: f64,
        denominator: f64,
        ratio: f64,
    },
    /// `max / min` of the solver's mean error across the sweep `≤ ratio`.
    MaxMinRatioAtMost {
        solver: BenchSolver,
        sigma_g: f64,
        ratio: f64,
    },
    /// `mean(solver @ value) ≤ max_err`.
    AtMost {
        solver: BenchSolver,
        sigma_g: f64,
        value: f64,
        max_err: f64,
    },
    /// Mean error never decreases along the sweep, up to `slack` pixels.
    NonDecreasing {
        solver: BenchSolver,
        sigma_g: f64,
        #[serde(default)]
        slack: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default)]
    pub name: Option<String>,
    pub param: SweepParam,
    pub values: Vec<f64>,
    /// Rotation magnitude in degrees when not swept.
    #[serde(default = "default_omega")]
    pub omega_deg: f64,
    #[serde(default = "default_speed")]
    pub speed: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default)]
    pub k: f64,
    /// Draw k uniformly from this range per configuration instead of using `k`.
    #[serde(default)]
    pub k_random: Option<[f64; 2]>,
    #[serde(default = "default_sigma")]
    pub sigma_g: Vec<f64>,
    #[serde(default = "default_configs")]
    pub configs: usize,
    #[serde(default = "default_points")]
    pub points: usize,
    pub solvers: Vec<BenchSolver>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub fit: FitMode,
    #[serde(default = "default_generator")]
    pub generator: Generator,
    #[serde(default)]
    pub ransac: RansacSpec,
    /// Admissible acceleration range of the constant-acceleration solver.
    #[serde(default)]
    pub k_range: Option<[f64; 2]>,
    #[serde(default)]
    pub checks: Vec<Check>,
}

impl SweepSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| Error::Spec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Spec(m));
        if self.solvers.is_empty() {
            return bad("solver list is empty".into());
        }
        if self.values.is_empty() {
            return bad("no sweep values".into());
        }
        if self.sigma_g.is_empty() || self.sigma_g.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return bad("noise levels must be non-negative".into());
        }
        if self.configs == 0 {
            return bad("configs must be positive".into());
        }
        if self.points < 5 {
            return bad("at least 5 points per scene".into());
        }
        if self.ransac.trials == 0 {
            return bad("RANSAC needs at least one trial".into());
        }
        let (lo, hi) = match self.param {
            SweepParam::Gamma => (0.0, 1.0),
            SweepParam::Omega => (0.0, 9.0),
            SweepParam::Speed => (0.0, 0.1),
            SweepParam::K => (-1.99, 10.0),
        };
        if let Some(v) = self.values.iter().find(|v| !(**v >= lo && **v <= hi)) {
            return bad(format!("{} value {v} outside [{lo}, {hi}]", self.param.name()));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad(format!("gamma {} outside [0, 1]", self.gamma));
        }
        if !(self.k > -2.0) || self.k_random.is_some_and(|[a, b]| !(a > -2.0 && a <= b)) {
            return bad("acceleration must exceed -2".into());
        }
        self.k_range()?;
        Ok(())
    }

    pub fn k_range(&self) -> Result<KRange<f64>> {
        match self.k_range {
            Some([a, b]) => Ok(KRange::new(a, b)?),
            None => Ok(KRange::default()),
        }
    }

    /// Fit mode actually used at noise level `sigma_g`.
    pub fn fit_at(&self, sigma_g: f64) -> FitMode {
        match self.fit {
            FitMode::Auto if sigma_g == 0.0 => FitMode::Lsq,
            FitMode::Auto => FitMode::Ransac,
            m => m,
        }
    }
}

/// Mixes `tags` into `seed` (splitmix64 finalizer per step).
pub fn sub_seed(seed: u64, tags: &[u64]) -> u64 {
    let mut z = seed;
    for &t in tags {
        z = z.wrapping_add(t.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^= z >> 31;
    }
    z
}

/// Mean transfer error of `model` over noise-free correspondences:
/// discrete models by homography transfer, differential models through the
/// rolling-shutter forward map. `None` if some point cannot be mapped.
pub fn clean_error(model: &Model, clean: &[Correspondence]) -> Option<f64> {
    let mut sum = 0.0;
    for c in clean {
        let e = match model {
            Model::Discrete(h) => residual_gs_disc(h, c),
            Model::Differential(m) => forward_map_rs(m, c.p1)?.distance(c.p2()),
        };
        if !e.is_finite() {
            return None;
        }
        sum += e;
    }
    Some(sum / clean.len() as f64)
}

/// Fits `solver` to `corrs` under the sweep's protocol.
pub fn fit_solver(
    spec: &SweepSpec,
    solver: BenchSolver,
    corrs: &[Correspondence],
    rs: RsParams,
    sigma_g: f64,
    seed: u64,
) -> Result<Model> {
    let mut kind = solver.kind();
    // with γ = 0 the acceleration does not enter the model
    if kind == SolverKind::RsConstAcc && rs.gamma == 0.0 {
        kind = SolverKind::RsConstVel;
    }
    let k_range = spec.k_range()?;
    match spec.fit_at(sigma_g) {
        FitMode::Lsq | FitMode::Auto => Ok(fit_candidates(kind, corrs, rs, k_range)?.remove(0)),
        FitMode::Ransac => {
            let threshold = spec.ransac.threshold.unwrap_or((3.0 * sigma_g).max(1.0));
            let mut params = RansacParams::new(kind)
                .with_threshold(threshold)
                .with_seed(seed)
                .with_trials(spec.ransac.trials);
            params.k_range = k_range;
            match solver {
                BenchSolver::Gs5Point => params = params.with_sample_size(5),
                BenchSolver::GsMoreTrials => params = params.with_trials(spec.ransac.trials * 5 / 4),
                _ => {}
            }
            let est = ransac(corrs, kind, &params, rs)?;
            let inliers: Vec<Correspondence> = est.inliers.iter().map(|&i| corrs[i]).collect();
            Ok(refit(kind, &est.model, &inliers, rs, k_range).unwrap_or(est.model))
        }
    }
}

/// One CSV row: a (sweep value, solver, noise level) cell averaged over configs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub sweep_param: SweepParam,
    pub sweep_value: f64,
    pub solver: BenchSolver,
    pub sigma_g: f64,
    /// NaN when every configuration failed.
    pub mean_err_px: f64,
    pub std_err_px: f64,
    pub n_configs: usize,
    pub failures: usize,
    pub fit: FitMode,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

pub const CSV_HEADER: &str = "sweep_param,sweep_value,solver,sigma_g,mean_err_px,std_err_px,n_configs,failures,fit";

impl SweepTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let fit = match r.fit {
                FitMode::Lsq => "lsq",
                _ => "ransac",
            };
            writeln!(
                out,
                "{},{},{},{},{:.9e},{:.9e},{},{},{}",
                r.sweep_param.name(),
                r.sweep_value,
                r.solver.name(),
                r.sigma_g,
                r.mean_err_px,
                r.std_err_px,
                r.n_configs,
                r.failures,
                fit
            )
            .expect("writing to a String");
        }
        out
    }

    pub fn get(&self, solver: BenchSolver, sigma_g: f64, value: f64) -> Option<&SweepRow> {
        self.rows
            .iter()
            .find(|r| r.solver == solver && close(r.sigma_g, sigma_g) && close(r.sweep_value, value))
    }

    /// Rows of one solver and noise level in sweep order.
    pub fn series(&self, solver: BenchSolver, sigma_g: f64) -> Vec<&SweepRow> {
        self.rows
            .iter()
            .filter(|r| r.solver == solver && close(r.sigma_g, sigma_g))
            .collect()
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()))
}

fn scene_config(spec: &SweepSpec, value: f64, config: usize) -> Result<SceneConfig> {
    let mut k = spec.k;
    if let Some([a, b]) = spec.k_random {
        let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(spec.seed, &[1, config as u64]));
        k = if a < b { rng.random_range(a..=b) } else { a };
    }
    let (mut omega, mut speed, mut gamma) = (spec.omega_deg, spec.speed, spec.gamma);
    match spec.param {
        SweepParam::Gamma => gamma = value,
        SweepParam::Omega => omega = value,
        SweepParam::Speed => speed = value,
        SweepParam::K => k = value,
    }
    Ok(SceneConfig {
        omega_deg: omega,
        speed,
        k,
        n_points: spec.points,
        camera: CameraConfig::default().with_gamma(gamma)?,
    })
}

/// Per-config errors, indexed `[sigma][solver]`; `None` marks a failure.
fn run_config(spec: &SweepSpec, vi: usize, value: f64, config: usize) -> Vec<Vec<Option<f64>>> {
    let failed = || vec![vec![None; spec.solvers.len()]; spec.sigma_g.len()];
    let Ok(cfg) = scene_config(spec, value, config) else { return failed() };
    let Ok(scene) = SyntheticScene::generate(&cfg, sub_seed(spec.seed, &[2, config as u64])) else {
        return failed();
    };
    let rs = scene.camera.rs;
    spec.sigma_g
        .iter()
        .enumerate()
        .map(|(si, &sigma)| {
            let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(spec.seed, &[3, config as u64, vi as u64, si as u64]));
            let Ok(set) = gen_correspondences(&scene, sigma, spec.generator, &mut rng) else {
                return vec![None; spec.solvers.len()];
            };
            let ransac_seed = sub_seed(spec.seed, &[4, config as u64, vi as u64, si as u64]);
            spec.solvers
                .iter()
                .map(|&solver| {
                    fit_solver(spec, solver, &set.observed, rs, sigma, ransac_seed)
                        .ok()
                        .and_then(|m| clean_error(&m, &set.clean))
                })
                .collect()
        })
        .collect()
}

/// Runs every (sweep value, config) job and reduces in index order, so the
/// table does not depend on thread scheduling.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepTable> {
    spec.validate()?;
    let jobs: Vec<(usize, usize)> = (0..spec.values.len())
        .flat_map(|vi| (0..spec.configs).map(move |c| (vi, c)))
        .collect();
    let results: Vec<Vec<Vec<Option<f64>>>> = jobs
        .par_iter()
        .map(|&(vi, c)| run_config(spec, vi, spec.values[vi], c))
        .collect();

    let mut rows = Vec::new();
    for (vi, &value) in spec.values.iter().enumerate() {
        let per_value = &results[vi * spec.configs..(vi + 1) * spec.configs];
        for (si, &sigma) in spec.sigma_g.iter().enumerate() {
            for (oi, &solver) in spec.solvers.iter().enumerate() {
                let errs: Vec<f64> = per_value.iter().filter_map(|r| r[si][oi]).collect();
                let n = errs.len();
                let mean = if n > 0 { errs.iter().sum::<f64>() / n as f64 } else { f64::NAN };
                let std = if n > 1 {
                    (errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
                } else {
                    0.0
                };
                rows.push(SweepRow {
                    sweep_param: spec.param,
                    sweep_value: value,
                    solver,
                    sigma_g: sigma,
                    mean_err_px: mean,
                    std_err_px: std,
                    n_configs: spec.configs,
                    failures: spec.configs - n,
                    fit: spec.fit_at(sigma),
                });
            }
        }
    }
    Ok(SweepTable { rows })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub check: Check,
    pub passed: bool,
    pub detail: String,
}

fn mean_at(table: &SweepTable, solver: BenchSolver, sigma: f64, value: f64) -> std::result::Result<f64, String> {
    table
        .get(solver, sigma, value)
        .map(|r| r.mean_err_px)
        .filter(|m| m.is_finite())
        .ok_or_else(|| format!("no finite {} error at σ={sigma}, value {value}", solver.name()))
}

fn evaluate(check: &Check, table: &SweepTable) -> std::result::Result<String, String> {
    match *check {
        Check::LessEqual {
            lhs,
            rhs,
            sigma_g,
            min_value,
            max_value,
            strict,
        } => {
            let mut worst = f64::NEG_INFINITY;
            let mut n = 0;
            for r in table.series(lhs, sigma_g) {
                let v = r.sweep_value;
                if min_value.is_some_and(|m| v < m - 1e-12) || max_value.is_some_and(|m| v > m + 1e-12) {
                    continue;
                }
                let (a, b) = (mean_at(table, lhs, sigma_g, v)?, mean_at(table, rhs, sigma_g, v)?);
                let ok = if strict { a < b } else { a <= b };
                if !ok {
                    return Err(format!("{} {a:.4e} vs {} {b:.4e} at {v}", lhs.name(), rhs.name()));
                }
                worst = worst.max(a / b);
                n += 1;
            }
            if n == 0 {
                return Err("no sweep values in range".into());
            }
            Ok(format!("{n} values, largest ratio {worst:.3}"))
        }
        Check::RatioAtLeast {
            solver,
            sigma_g,
            numerator,
            denominator,
            ratio,
        } => {
            let r = mean_at(table, solver, sigma_g, numerator)? / mean_at(table, solver, sigma_g, denominator)?;
            if r >= ratio {
                Ok(format!("ratio {r:.3}"))
            } else {
                Err(format!("ratio {r:.3} < {ratio}"))
            }
        }
        Check::MaxMinRatioAtMost { solver, sigma_g, ratio } => {
            let s = table.series(solver, sigma_g);
            if s.is_empty() || s.iter().any(|r| !r.mean_err_px.is_finite()) {
                return Err(format!("missing {} errors", solver.name()));
            }
            let max = s.iter().map(|r| r.mean_err_px).fold(f64::NEG_INFINITY, f64::max);
            let min = s.iter().map(|r| r.mean_err_px).fold(f64::INFINITY, f64::min);
            let r = max / min;
            if r <= ratio {
                Ok(format!("max/min {r:.3}"))
            } else {
                Err(format!("max/min {r:.3} > {ratio}"))
            }
        }
        Check::AtMost {
            solver,
            sigma_g,
            value,
            max_err,
        } => {
            let e = mean_at(table, solver, sigma_g, value)?;
            if e <= max_err {
                Ok(format!("error {e:.3e}"))
            } else {
                Err(format!("error {e:.3e} > {max_err:e}"))
            }
        }
        Check::NonDecreasing { solver, sigma_g, slack } => {
            let s = table.series(solver, sigma_g);
            for w in s.windows(2) {
                if !(w[1].mean_err_px + slack >= w[0].mean_err_px) {
                    return Err(format!(
                        "drops from {:.4e} at {} to {:.4e} at {}",
                        w[0].mean_err_px, w[0].sweep_value, w[1].mean_err_px, w[1].sweep_value
                    ));
                }
            }
            Ok(format!("{} values", s.len()))
        }
    }
}

pub fn evaluate_checks(spec: &SweepSpec, table: &SweepTable) -> Vec<CheckOutcome> {
    spec.checks
        .iter()
        .map(|c| {
            let (passed, detail) = match evaluate(c, table) {
                Ok(d) => (true, d),
                Err(d) => (false, d),
            };
            CheckOutcome {
                check: c.clone(),
                passed,
                detail,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_schema() {
        let spec = SweepSpec::from_toml(
            r#"
            param = "gamma"
            values = [0.0, 1.0]
            solvers = ["gs-disc", "gs-5point"]
            [[checks]]
            kind = "at_most"
            solver = "gs-disc"
            sigma_g = 0.0
            value = 0.0
            max_err = 1e-6
            "#,
        )
        .unwrap();
        assert_eq!(spec.configs, 100);
        assert_eq!(spec.solvers[1], BenchSolver::Gs5Point);
        assert_eq!(spec.fit_at(0.0), FitMode::Lsq);
        assert_eq!(spec.fit_at(1.0), FitMode::Ransac);
        assert!(SweepSpec::from_toml("param = \"gamma\"\nvalues = [0.5]\nsolvers = []").is_err());
        assert!(SweepSpec::from_toml("param = \"gamma\"\nvalues = [1.5]\nsolvers = [\"gs-disc\"]").is_err());
        assert!(SweepSpec::from_toml("param = \"gamma\"\nvalues = [0.5]\nsolvers = [\"nope\"]").is_err());
    }

    #[test]
    fn sub_seeds_differ() {
        assert_ne!(sub_seed(0, &[1, 2]), sub_seed(0, &[2, 1]));
        assert_eq!(sub_seed(5, &[3]), sub_seed(5, &[3]));
    }
}
