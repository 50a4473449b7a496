//! Stitching quality and reprojection-error statistics.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rsstitch_core::robust::{ransac, refit, RansacParams, SolverKind};
use rsstitch_core::{Correspondence, Model, RsParams};
use rsstitch_render::{Canvas, Raster};

use crate::error::{Error, Result};

/// Variance below which a 3×3 window counts as constant (8-bit intensities).
const FLAT: f64 = 1e-9;

/// `√(mean (1 - NCC)²)` over 3×3 windows fully inside `overlap`.
///
/// Colour inputs are converted to gray. Windows constant in both images
/// score NCC = 1; windows constant in only one are skipped. The result lies
/// in `[0, 2]`.
pub fn rmse_ncc(a: &Raster, b: &Raster, overlap: Option<&[bool]>) -> Result<f64> {
    let (w, h) = (a.width(), a.height());
    if b.width() != w || b.height() != h {
        return Err(Error::Config(format!(
            "image sizes differ: {w}×{h} vs {}×{}",
            b.width(),
            b.height()
        )));
    }
    if let Some(m) = overlap {
        if m.len() != w * h {
            return Err(Error::Config("overlap mask does not match image size".into()));
        }
    }
    let (ga, gb) = (a.to_gray(), b.to_gray());
    let inside = |x: usize, y: usize| {
        ga.is_valid(x, y) && gb.is_valid(x, y) && overlap.is_none_or(|m| m[y * w + x])
    };
    let mut sum = 0.0;
    let mut n = 0usize;
    for y in 1..h.saturating_sub(1) {
        for x in 1..w.saturating_sub(1) {
            let mut wa = [0.0; 9];
            let mut wb = [0.0; 9];
            let mut ok = true;
            for (i, (dy, dx)) in (0..3).flat_map(|dy| (0..3).map(move |dx| (dy, dx))).enumerate() {
                let (px, py) = (x + dx - 1, y + dy - 1);
                if !inside(px, py) {
                    ok = false;
                    break;
                }
                wa[i] = ga.pixel(px, py)[0] as f64;
                wb[i] = gb.pixel(px, py)[0] as f64;
            }
            if !ok {
                continue;
            }
            if let Some(ncc) = window_ncc(&wa, &wb) {
                sum += (1.0 - ncc).powi(2);
                n += 1;
            }
        }
    }
    if n == 0 {
        return Err(Error::UndefinedMetric("no 3×3 window inside the overlap".into()));
    }
    Ok((sum / n as f64).sqrt())
}

fn window_ncc(a: &[f64; 9], b: &[f64; 9]) -> Option<f64> {
    let ma = a.iter().sum::<f64>() / 9.0;
    let mb = b.iter().sum::<f64>() / 9.0;
    let (mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0);
    for i in 0..9 {
        let (da, db) = (a[i] - ma, b[i] - mb);
        saa += da * da;
        sbb += db * db;
        sab += da * db;
    }
    match (saa <= FLAT, sbb <= FLAT) {
        (true, true) => Some(1.0),
        (false, false) => Some((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0)),
        _ => None,
    }
}

/// [`rmse_ncc`] between the first two source layers of a stitched canvas,
/// over the pixels both cover.
pub fn canvas_rmse_ncc(canvas: &Canvas) -> Result<f64> {
    match canvas.layers.as_slice() {
        [a, b, ..] => rmse_ncc(a, b, None),
        _ => Err(Error::UndefinedMetric("canvas has fewer than two sources".into())),
    }
}

/// Median of `v`; NaN when empty.
pub fn median_of(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Empirical CDF of per-pair median errors: sorted values with `F = (i+1)/n`.
pub fn eval_cdf(medians: &[f64]) -> Vec<(f64, f64)> {
    let mut v: Vec<f64> = medians.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.into_iter().enumerate().map(|(i, m)| (m, (i + 1) as f64 / n)).collect()
}

/// `F(x)`: fraction of entries of a CDF table at or below `x`.
pub fn cdf_at(cdf: &[(f64, f64)], x: f64) -> f64 {
    cdf.iter().take_while(|(m, _)| *m <= x).last().map_or(0.0, |(_, f)| *f)
}

/// Reserves `n_test` random indices out of `n` for evaluation only.
pub fn holdout_split(n: usize, n_test: usize, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if n_test >= n {
        return Err(Error::Config(format!("cannot hold out {n_test} of {n} correspondences")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut test = idx.split_off(n - n_test);
    let mut train = idx;
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

#[derive(Debug, Clone)]
pub struct HoldoutReport {
    pub model: Model,
    /// Median residual over the training inliers.
    pub train_median: f64,
    /// Median residual over the held-out set.
    pub test_median: f64,
}

/// Fits on the training split only (RANSAC and inlier refit) and scores
/// the held-out correspondences.
pub fn evaluate_holdout(
    corrs: &[Correspondence],
    test: &[usize],
    kind: SolverKind,
    params: &RansacParams<f64>,
    rs: RsParams,
) -> Result<HoldoutReport> {
    let mut held = vec![false; corrs.len()];
    for &i in test {
        held[i] = true;
    }
    let train: Vec<Correspondence> = corrs.iter().zip(&held).filter(|(_, h)| !**h).map(|(c, _)| *c).collect();
    let est = ransac(&train, kind, params, rs)?;
    let inliers: Vec<Correspondence> = est.inliers.iter().map(|&i| train[i]).collect();
    let model = refit(kind, &est.model, &inliers, rs, params.k_range).unwrap_or(est.model);
    let train_median = median_of(inliers.iter().map(|c| model.residual(c)).collect());
    let test_median = median_of(test.iter().map(|&i| model.residual(&corrs[i])).collect());
    Ok(HoldoutReport {
        model,
        train_median,
        test_median,
    })
}
