//! RANSAC over any of the homography solvers.
//!
//! Every trial draws its sample from its own ChaCha stream `(seed, trial)`,
//! and the best model is picked with a total order over
//! `(inlier count, inlier median, trial, candidate)`. Serial and parallel
//! schedules therefore agree bit for bit.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::flow::flow_rs;
use crate::geometry::{Correspondence, Homography, RsDiffModel, RsParams};
use crate::scalar::Real;
use crate::solvers::{
    solve_gs_diff, solve_gs_discrete, solve_rs_constacc_5pt, solve_rs_constacc_lsq,
    solve_rs_constvel, solve_rs_weighted, KRange,
};

/// Which model family a robust estimate fits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolverKind {
    /// Discrete homography, DLT.
    GsDiscrete,
    /// Global-shutter differential homography.
    GsDiff,
    /// Rolling-shutter differential, constant velocity.
    RsConstVel,
    /// Rolling-shutter differential, constant acceleration.
    RsConstAcc,
}

impl SolverKind {
    pub fn minimal_sample(self) -> usize {
        match self {
            SolverKind::RsConstAcc => 5,
            _ => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::GsDiscrete => "gs-disc",
            SolverKind::GsDiff => "gs-diff",
            SolverKind::RsConstVel => "rs-constvel",
            SolverKind::RsConstAcc => "rs-constacc",
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gs-disc" => Ok(SolverKind::GsDiscrete),
            "gs-diff" => Ok(SolverKind::GsDiff),
            "rs-constvel" => Ok(SolverKind::RsConstVel),
            "rs-constacc" => Ok(SolverKind::RsConstAcc),
            other => Err(Error::InvalidParameter(format!("unknown solver `{other}`"))),
        }
    }
}

/// A fitted planar motion model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Model<T: Real> {
    Discrete(Homography<T>),
    /// Differential model; global-shutter fits carry `γ = 0`, `k = 0`.
    Differential(RsDiffModel<T>),
}

impl<T: Real> Model<T> {
    pub fn residual(&self, c: &Correspondence<T>) -> T {
        match self {
            Model::Discrete(h) => residual_gs_disc(h, c),
            Model::Differential(m) => residual_rs(m, c),
        }
    }

    pub fn acceleration(&self) -> Option<T> {
        match self {
            Model::Differential(m) if m.rs.gamma > T::zero() => Some(m.k),
            _ => None,
        }
    }
}

/// Transfer error `‖p2 - π(H x̂1)‖`; points mapped to infinity score `+∞`.
pub fn residual_gs_disc<T: Real>(h: &Homography<T>, c: &Correspondence<T>) -> T {
    let x = c.p1.homogeneous();
    let q = h.matrix() * x;
    let scale = h.matrix().norm() * x.norm();
    if !(q.z.abs() > scale * T::eps() * T::lit(16.0)) {
        return T::max_value().unwrap_or(T::one() / T::eps());
    }
    let p2 = c.p2();
    let dx = p2.x - q.x / q.z;
    let dy = p2.y - q.y / q.z;
    (dx * dx + dy * dy).sqrt()
}

/// Flow error `‖u - β(k, y1, y2) flow_gs(H, p1)‖` with `y2` taken from the
/// observation.
pub fn residual_rs<T: Real>(model: &RsDiffModel<T>, c: &Correspondence<T>) -> T {
    (c.flow - flow_rs(model, c.p1, c.y2())).norm()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RansacParams<T> {
    pub trials: usize,
    /// Inlier cutoff in pixels.
    pub threshold: T,
    pub sample_size: usize,
    pub seed: u64,
    pub k_range: KRange<T>,
}

impl<T: Real> RansacParams<T> {
    /// 1000 trials, 1 px threshold, minimal samples.
    pub fn new(kind: SolverKind) -> Self {
        Self {
            trials: 1000,
            threshold: T::one(),
            sample_size: kind.minimal_sample(),
            seed: 0,
            k_range: KRange::default(),
        }
    }

    /// The "GS-MoreTrials" protocol: 1250 trials.
    pub fn more_trials(mut self) -> Self {
        self.trials = 1250;
        self
    }

    pub fn with_threshold(mut self, t: T) -> Self {
        self.threshold = t;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_sample_size(mut self, n: usize) -> Self {
        self.sample_size = n;
        self
    }

    pub fn with_trials(mut self, n: usize) -> Self {
        self.trials = n;
        self
    }

    pub fn validate(&self, kind: SolverKind) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidParameter("RANSAC needs at least one trial".into()));
        }
        if !(self.threshold > T::zero()) {
            return Err(Error::InvalidParameter("inlier threshold must be positive".into()));
        }
        if self.sample_size < kind.minimal_sample() {
            return Err(Error::InvalidParameter(format!(
                "sample size {} below the {} minimum of {}",
                self.sample_size,
                kind,
                kind.minimal_sample()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialStats {
    pub trials: usize,
    pub failed_trials: usize,
    pub models_scored: usize,
    pub best_trial: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustEstimate<T: Real> {
    pub model: Model<T>,
    pub inliers: Vec<usize>,
    /// Residual of every correspondence under `model`.
    pub residuals: Vec<T>,
    pub inlier_median: T,
    pub stats: TrialStats,
}

/// Fits `kind` to `sample`. Returns every candidate the solver produces.
pub fn fit_candidates<T: Real>(
    kind: SolverKind,
    sample: &[Correspondence<T>],
    rs: RsParams<T>,
    k_range: KRange<T>,
) -> Result<Vec<Model<T>>> {
    match kind {
        SolverKind::GsDiscrete => Ok(vec![Model::Discrete(solve_gs_discrete(sample)?)]),
        SolverKind::GsDiff => Ok(vec![Model::Differential(RsDiffModel::global(
            solve_gs_diff(sample)?,
            rs.height,
        ))]),
        SolverKind::RsConstVel => Ok(vec![Model::Differential(solve_rs_constvel(sample, rs)?)]),
        SolverKind::RsConstAcc if sample.len() == 5 => Ok(solve_rs_constacc_5pt(sample, rs, k_range)?
            .models
            .into_iter()
            .map(Model::Differential)
            .collect()),
        SolverKind::RsConstAcc => Ok(vec![Model::Differential(solve_rs_constacc_lsq(
            sample, rs, k_range, None,
        )?)]),
    }
}

/// Least-squares refit of `model` on a correspondence subset.
///
/// Discrete and differential models are refit with uniform weights; for the
/// constant-acceleration family `k` is refined around its current value.
pub fn refit<T: Real>(
    kind: SolverKind,
    model: &Model<T>,
    corrs: &[Correspondence<T>],
    rs: RsParams<T>,
    k_range: KRange<T>,
) -> Result<Model<T>> {
    match (kind, model) {
        (SolverKind::RsConstAcc, Model::Differential(m)) => Ok(Model::Differential(
            solve_rs_constacc_lsq(corrs, rs, k_range, Some(m.k))?,
        )),
        (SolverKind::RsConstVel, Model::Differential(m)) => {
            let w = vec![T::one(); corrs.len()];
            Ok(Model::Differential(RsDiffModel::new(
                solve_rs_weighted(corrs, &w, m.k, m.rs)?,
                m.k,
                m.rs,
            )?))
        }
        _ => Ok(fit_candidates(kind, corrs, rs, k_range)?.remove(0)),
    }
}

#[derive(Debug, Clone)]
struct Scored<T: Real> {
    count: usize,
    median: T,
    trial: usize,
    candidate: usize,
    model: Model<T>,
    residuals: Vec<T>,
}

fn better<T: Real>(a: &Scored<T>, b: &Scored<T>) -> Ordering {
    b.count
        .cmp(&a.count)
        .then_with(|| a.median.partial_cmp(&b.median).unwrap_or(Ordering::Equal))
        .then_with(|| a.trial.cmp(&b.trial))
        .then_with(|| a.candidate.cmp(&b.candidate))
}

fn pick<T: Real>(a: Option<Scored<T>>, b: Option<Scored<T>>) -> Option<Scored<T>> {
    match (a, b) {
        (Some(a), Some(b)) => Some(if better(&a, &b) == Ordering::Greater { b } else { a }),
        (a, None) => a,
        (None, b) => b,
    }
}

pub(crate) fn median<T: Real>(values: &mut [T]) -> T {
    if values.is_empty() {
        return T::max_value().unwrap_or(T::one() / T::eps());
    }
    values.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) * T::lit(0.5)
    }
}

fn score<T: Real>(
    model: Model<T>,
    corrs: &[Correspondence<T>],
    threshold: T,
    trial: usize,
    candidate: usize,
) -> Scored<T> {
    let residuals: Vec<T> = corrs.iter().map(|c| model.residual(c)).collect();
    let mut inl: Vec<T> = residuals
        .iter()
        .copied()
        .filter(|r| r.is_finite() && *r <= threshold)
        .collect();
    Scored {
        count: inl.len(),
        median: median(&mut inl),
        trial,
        candidate,
        model,
        residuals,
    }
}

/// Random sample `trial` of size `m` out of `n`.
pub fn trial_sample(seed: u64, trial: usize, n: usize, m: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rand::seq::index::sample(&mut rng, n, m).into_vec()
}

/// Max-consensus RANSAC. The returned model is the best trial model as is;
/// use [`refit`] for a least-squares polish on the inliers.
pub fn ransac<T: Real>(
    corrs: &[Correspondence<T>],
    kind: SolverKind,
    params: &RansacParams<T>,
    rs: RsParams<T>,
) -> Result<RobustEstimate<T>> {
    params.validate(kind)?;
    if corrs.len() < params.sample_size {
        return Err(Error::TooFewCorrespondences {
            needed: params.sample_size,
            got: corrs.len(),
        });
    }
    let n = corrs.len();
    let outcomes: Vec<(usize, Option<Scored<T>>)> = (0..params.trials)
        .into_par_iter()
        .map(|trial| {
            let idx = trial_sample(params.seed, trial, n, params.sample_size);
            let sample: Vec<_> = idx.iter().map(|&i| corrs[i]).collect();
            match fit_candidates(kind, &sample, rs, params.k_range) {
                Ok(models) => {
                    let count = models.len();
                    let best = models
                        .into_iter()
                        .enumerate()
                        .map(|(ci, m)| Some(score(m, corrs, params.threshold, trial, ci)))
                        .fold(None, pick);
                    (count, best)
                }
                Err(_) => (0, None),
            }
        })
        .collect();

    let failed_trials = outcomes.iter().filter(|(c, _)| *c == 0).count();
    let models_scored = outcomes.iter().map(|(c, _)| c).sum();
    let best = outcomes
        .into_iter()
        .map(|(_, s)| s)
        .fold(None, pick)
        .filter(|s| s.count > 0)
        .ok_or_else(|| {
            Error::EstimationFailure(format!(
                "no admissible {kind} model in {} trials",
                params.trials
            ))
        })?;

    let inliers = best
        .residuals
        .iter()
        .enumerate()
        .filter(|(_, r)| r.is_finite() && **r <= params.threshold)
        .map(|(i, _)| i)
        .collect();
    Ok(RobustEstimate {
        model: best.model,
        inliers,
        residuals: best.residuals,
        inlier_median: best.median,
        stats: TrialStats {
            trials: params.trials,
            failed_trials,
            models_scored,
            best_trial: best.trial,
        },
    })
}
