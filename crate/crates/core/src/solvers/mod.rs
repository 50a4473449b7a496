//! Minimal and least-squares homography solvers.
//!
//! | solver | model | minimal sample |
//! |---|---|---|
//! | [`solve_gs_discrete`] | discrete homography | 4 |
//! | [`solve_gs_diff`] | differential homography | 4 |
//! | [`solve_rs_constvel`] | RS differential, `k = 0` | 4 |
//! | [`solve_rs_constacc_5pt`] | RS differential with acceleration `k` | 5 |
//! | [`solve_rs_weighted`] | RS differential, fixed `k`, per-point weights | 4 |
//!
//! Every solver normalizes its input internally and returns models in pixel
//! coordinates.

mod constacc;
mod discrete;
mod linear;
pub mod poly;

pub use constacc::{
    solve_rs_constacc_5pt, solve_rs_constacc_lsq, Diagnostics, FivePointSystem, KRange,
    SolverOutput,
};
pub use discrete::{solve_gs_discrete, DiscreteSystem};
pub use linear::{
    solve_gs_diff, solve_rs_constvel, solve_rs_weighted, DifferentialSystem, LinearFit,
};

use nalgebra::{DMatrix, DVector};

use crate::geometry::{Correspondence, RsParams};
use crate::rs::beta_unchecked;
use crate::scalar::Real;

/// Singular triplets sorted by decreasing singular value.
pub(crate) struct SortedSvd<T: Real> {
    pub values: Vec<T>,
    pub left: Vec<DVector<T>>,
    pub right: Vec<DVector<T>>,
}

pub(crate) fn sorted_svd<T: Real>(a: DMatrix<T>, want_left: bool) -> Option<SortedSvd<T>> {
    let svd = a.svd(want_left, true);
    let vt = svd.v_t?;
    let u = if want_left { Some(svd.u?) } else { None };
    let sv = svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&i, &j| sv[j].partial_cmp(&sv[i]).unwrap_or(std::cmp::Ordering::Equal));
    if sv.iter().any(|s| !s.is_finite()) {
        return None;
    }
    Some(SortedSvd {
        values: order.iter().map(|&i| sv[i]).collect(),
        left: match &u {
            Some(u) => order.iter().map(|&i| u.column(i).into_owned()).collect(),
            None => Vec::new(),
        },
        right: order.iter().map(|&i| vt.row(i).transpose()).collect(),
    })
}

/// Relative singular-value floor below which a system counts as rank deficient.
pub(crate) fn rank_tolerance<T: Real>() -> T {
    T::eps().sqrt() * T::lit(0.1)
}

/// Per-correspondence `β(k, y1, y2)` with `y2` taken from the observation.
pub fn observed_betas<T: Real>(corrs: &[Correspondence<T>], k: T, rs: &RsParams<T>) -> Vec<T> {
    corrs
        .iter()
        .map(|c| beta_unchecked(k, c.p1.y, c.y2(), rs))
        .collect()
}

pub(crate) fn require<T>(corrs: &[T], needed: usize) -> crate::Result<()> {
    if corrs.len() < needed {
        Err(crate::Error::TooFewCorrespondences {
            needed,
            got: corrs.len(),
        })
    } else {
        Ok(())
    }
}
