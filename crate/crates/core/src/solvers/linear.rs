use nalgebra::{DMatrix, DVector, Matrix3};

use crate::error::{Error, Result};
use crate::flow::flow_coeff_rows;
use crate::geometry::{check_acceleration, Correspondence, Homography, RsDiffModel, RsParams};
use crate::normalize::{hartley_normalize, Similarity};
use crate::scalar::Real;

use super::{observed_betas, rank_tolerance, require, sorted_svd};

/// Result of a linear differential fit.
#[derive(Debug, Clone, Copy)]
pub struct LinearFit<T: Real> {
    pub h: Homography<T>,
    /// `‖W(βBh - U)‖` in normalized coordinates.
    pub residual: T,
    /// Smallest retained over largest singular value.
    pub conditioning: T,
}

/// The stacked flow constraints `b_i h = u_i` of a correspondence set, in
/// normalized coordinates, ready to be rescaled by per-point `β` and weights.
#[derive(Debug, Clone)]
pub struct DifferentialSystem<T: Real> {
    sim: Similarity<T>,
    rows: Vec<[[T; 9]; 2]>,
    rhs: Vec<[T; 2]>,
}

impl<T: Real> DifferentialSystem<T> {
    pub fn new(corrs: &[Correspondence<T>]) -> Result<Self> {
        require(corrs, 4)?;
        let (sim, norm) = hartley_normalize(corrs)?;
        Ok(Self::from_normalized(sim, &norm))
    }

    /// Builds the system for `corrs` under an externally chosen normalization.
    pub fn with_similarity(corrs: &[Correspondence<T>], sim: Similarity<T>) -> Self {
        let norm: Vec<_> = corrs.iter().map(|c| sim.apply_correspondence(c)).collect();
        Self::from_normalized(sim, &norm)
    }

    fn from_normalized(sim: Similarity<T>, norm: &[Correspondence<T>]) -> Self {
        let mut rows = Vec::with_capacity(norm.len());
        let mut rhs = Vec::with_capacity(norm.len());
        for c in norm {
            let b = flow_coeff_rows(c.p1);
            let mut r = [[T::zero(); 9]; 2];
            for j in 0..9 {
                r[0][j] = b[(0, j)];
                r[1][j] = b[(1, j)];
            }
            rows.push(r);
            rhs.push([c.flow.x, c.flow.y]);
        }
        Self { sim, rows, rhs }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn similarity(&self) -> &Similarity<T> {
        &self.sim
    }

    /// Minimizes `Σ ‖w_i (β_i b_i h - u_i)‖²`.
    ///
    /// The `εI` direction is always in the null space of the stacked rows;
    /// the returned representative is the minimum-norm solution in normalized
    /// coordinates.
    pub fn solve(&self, betas: &[T], weights: Option<&[T]>) -> Result<LinearFit<T>> {
        let n = self.rows.len();
        assert_eq!(betas.len(), n, "one beta per correspondence");
        if let Some(w) = weights {
            assert_eq!(w.len(), n, "one weight per correspondence");
        }
        let active = match weights {
            Some(w) => w.iter().filter(|&&w| w > T::zero()).count(),
            None => n,
        };
        if active < 4 {
            return Err(Error::TooFewCorrespondences {
                needed: 4,
                got: active,
            });
        }

        let mut a = DMatrix::<T>::zeros(2 * n, 9);
        let mut b = DVector::<T>::zeros(2 * n);
        for i in 0..n {
            let w = weights.map_or(T::one(), |w| w[i]);
            let s = w * betas[i];
            for r in 0..2 {
                for j in 0..9 {
                    a[(2 * i + r, j)] = s * self.rows[i][r][j];
                }
                b[2 * i + r] = w * self.rhs[i][r];
            }
        }
        let svd = sorted_svd(a.clone(), true)
            .ok_or_else(|| Error::DegenerateSample("SVD failed on flow system".into()))?;
        if svd.values.len() < 8 || !(svd.values[0] > T::zero()) {
            return Err(Error::DegenerateSample("flow system is empty".into()));
        }
        let conditioning = svd.values[7] / svd.values[0];
        if !(conditioning > rank_tolerance()) {
            return Err(Error::DegenerateSample(format!(
                "flow system rank < 8 (conditioning {:.3e})",
                conditioning.as_f64()
            )));
        }
        let mut h = DVector::<T>::zeros(9);
        for i in 0..8 {
            let coef = svd.left[i].dot(&b) / svd.values[i];
            h += &svd.right[i] * coef;
        }
        let residual = (&a * &h - &b).norm();
        let h_norm = Homography(Matrix3::from_row_slice(h.as_slice()));
        Ok(LinearFit {
            h: self.sim.denormalize_differential(&h_norm),
            residual,
            conditioning,
        })
    }
}

/// Global-shutter differential fit of `B h = U` by pseudo-inverse.
pub fn solve_gs_diff<T: Real>(corrs: &[Correspondence<T>]) -> Result<Homography<T>> {
    let sys = DifferentialSystem::new(corrs)?;
    let ones = vec![T::one(); corrs.len()];
    Ok(sys.solve(&ones, None)?.h)
}

/// Rolling-shutter fit under constant velocity (`k = 0`), where
/// `β = 1 + γ(y2 - y1)/h` is known per point.
pub fn solve_rs_constvel<T: Real>(
    corrs: &[Correspondence<T>],
    rs: RsParams<T>,
) -> Result<RsDiffModel<T>> {
    rs.validate()?;
    let sys = DifferentialSystem::new(corrs)?;
    let betas = observed_betas(corrs, T::zero(), &rs);
    let fit = sys.solve(&betas, None)?;
    RsDiffModel::new(fit.h, T::zero(), rs)
}

/// Weighted rolling-shutter fit with fixed acceleration `k`.
pub fn solve_rs_weighted<T: Real>(
    corrs: &[Correspondence<T>],
    weights: &[T],
    k: T,
    rs: RsParams<T>,
) -> Result<Homography<T>> {
    check_acceleration(k)?;
    rs.validate()?;
    if weights.len() != corrs.len() {
        return Err(Error::InvalidParameter(format!(
            "{} weights for {} correspondences",
            weights.len(),
            corrs.len()
        )));
    }
    if weights.iter().any(|w| !(*w >= T::zero()) || !w.is_finite()) {
        return Err(Error::InvalidParameter("weights must be finite and non-negative".into()));
    }
    let sys = DifferentialSystem::new(corrs)?;
    let betas = observed_betas(corrs, k, &rs);
    Ok(sys.solve(&betas, Some(weights))?.h)
}
