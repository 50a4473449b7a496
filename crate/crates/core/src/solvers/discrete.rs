use nalgebra::{DMatrix, Matrix3};

use crate::error::{Error, Result};
use crate::geometry::{Correspondence, Homography, Pixel};
use crate::normalize::{normalize_points, Similarity};
use crate::scalar::Real;

use super::{rank_tolerance, require, sorted_svd};

/// DLT constraints `A h = 0` of a correspondence set after normalizing each
/// view separately.
#[derive(Debug, Clone)]
pub struct DiscreteSystem<T: Real> {
    t1: Similarity<T>,
    t2: Similarity<T>,
    rows: Vec<[[T; 9]; 2]>,
}

impl<T: Real> DiscreteSystem<T> {
    pub fn new(corrs: &[Correspondence<T>]) -> Result<Self> {
        require(corrs, 4)?;
        let p1: Vec<_> = corrs.iter().map(|c| c.p1).collect();
        let p2: Vec<_> = corrs.iter().map(|c| c.p2()).collect();
        let t1 = normalize_points(&p1)?;
        let t2 = normalize_points(&p2)?;
        if corrs.len() == 4 {
            let n1: Vec<_> = p1.iter().map(|&p| t1.apply(p)).collect();
            let n2: Vec<_> = p2.iter().map(|&p| t2.apply(p)).collect();
            if has_collinear_triple(&n1) || has_collinear_triple(&n2) {
                return Err(Error::DegenerateSample(
                    "three of the four points are collinear".into(),
                ));
            }
        }
        let rows = p1
            .iter()
            .zip(&p2)
            .map(|(&a, &b)| {
                let a = t1.apply(a);
                let b = t2.apply(b);
                let (o, z) = (T::one(), T::zero());
                [
                    [-a.x, -a.y, -o, z, z, z, b.x * a.x, b.x * a.y, b.x],
                    [z, z, z, -a.x, -a.y, -o, b.y * a.x, b.y * a.y, b.y],
                ]
            })
            .collect();
        Ok(Self { t1, t2, rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Unit-norm minimizer of `Σ ‖w_i a_i h‖²`, in pixel coordinates.
    pub fn solve(&self, weights: Option<&[T]>) -> Result<Homography<T>> {
        self.solve_conditioned(weights).map(|(h, _)| h)
    }

    /// Like [`Self::solve`], also returning `σ₈ / σ₁` of the weighted system.
    pub fn solve_conditioned(&self, weights: Option<&[T]>) -> Result<(Homography<T>, T)> {
        let n = self.rows.len();
        // pad to at least 9 rows so the SVD exposes the full right basis
        let m = (2 * n).max(9);
        let mut a = DMatrix::<T>::zeros(m, 9);
        for (i, r) in self.rows.iter().enumerate() {
            let w = weights.map_or(T::one(), |w| w[i]);
            for k in 0..2 {
                for j in 0..9 {
                    a[(2 * i + k, j)] = w * r[k][j];
                }
            }
        }
        let svd = sorted_svd(a, false)
            .ok_or_else(|| Error::DegenerateSample("SVD failed on DLT system".into()))?;
        let conditioning = svd.values[7] / svd.values[0];
        if !(svd.values[0] > T::zero()) || !(conditioning > rank_tolerance()) {
            return Err(Error::DegenerateSample(
                "DLT system has more than a one-dimensional null space".into(),
            ));
        }
        let h = &svd.right[8];
        let hn = Matrix3::from_row_slice(h.as_slice());
        let m = self.t2.inverse_matrix() * hn * self.t1.matrix();
        Ok((fix_sign(Homography(m).normalized()), conditioning))
    }
}

fn fix_sign<T: Real>(h: Homography<T>) -> Homography<T> {
    let m = h.matrix();
    let key = if m[(2, 2)].abs() > T::eps() { m[(2, 2)] } else { m.trace() };
    if key < T::zero() {
        Homography(-m)
    } else {
        h
    }
}

fn has_collinear_triple<T: Real>(pts: &[Pixel<T>]) -> bool {
    let tol = T::eps().sqrt() * T::lit(1e-2);
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            for k in j + 1..pts.len() {
                let (a, b, c) = (pts[i], pts[j], pts[k]);
                let cross = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
                if cross.abs() <= tol {
                    return true;
                }
            }
        }
    }
    false
}

/// Discrete homography by normalized DLT: `A h = 0` subject to `‖h‖ = 1`.
///
/// Exact on four noise-free points, total least squares beyond.
pub fn solve_gs_discrete<T: Real>(corrs: &[Correspondence<T>]) -> Result<Homography<T>> {
    DiscreteSystem::new(corrs)?.solve(None)
}
