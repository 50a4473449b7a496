//! Constant-acceleration rolling-shutter solvers.
//!
//! Each correspondence gives `β(k, y1, y2) b h = u`. Multiplying through by
//! `(2+k)/2`, which never vanishes for `k > -2`, turns this into
//! `(a + c·k) b h - u (2+k)/2 = 0` with every coefficient affine in `k`.
//!
//! Stacking five points gives ten equations in `[h; 1]`. The `εI` direction
//! satisfies `b·vec(I) = 0` for every point, so the gauge is fixed with
//! `H₃₃ = 0`, leaving nine unknowns. Using the four first points plus the
//! fifth point's equation along its flow direction gives a square 9×9 system
//! whose determinant is a degree ≤ 9 polynomial in `k`. Its real roots are
//! the acceleration candidates; `h` is then the least-squares null vector of
//! all ten equations.
//!
//! The polynomial is recovered by interpolation and reported in the
//! diagnostics, but the roots are taken from the matrix pencil directly (see
//! [`FivePointSystem::pencil_roots`]).

use nalgebra::{DMatrix, Matrix3, Vector2};

use crate::error::{Error, Result};
use crate::flow::flow_coeff_rows;
use crate::geometry::{Correspondence, Homography, RsDiffModel, RsParams};
use crate::normalize::{hartley_normalize, Similarity};
use crate::rs::beta_affine_parts;
use crate::scalar::Real;

use super::linear::DifferentialSystem;
use super::observed_betas;
use super::poly::PolyCoeffs;
use super::sorted_svd;

/// Admissible acceleration interval, a subset of `(-2, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KRange<T> {
    pub lo: T,
    pub hi: T,
}

impl<T: Real> KRange<T> {
    pub fn new(lo: T, hi: T) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) {
            return Err(Error::NonFinite);
        }
        if lo <= T::lit(-2.0) {
            return Err(Error::ParameterDomain(lo.as_f64()));
        }
        if !(lo < hi) {
            return Err(Error::InvalidParameter(format!(
                "empty k range [{}, {}]",
                lo.as_f64(),
                hi.as_f64()
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn contains(&self, k: T) -> bool {
        k >= self.lo && k <= self.hi
    }
}

impl<T: Real> Default for KRange<T> {
    fn default() -> Self {
        Self {
            lo: T::lit(-1.9),
            hi: T::lit(10.0),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Diagnostics<T: Real> {
    /// Determinant polynomial of the gauge-fixed square system.
    pub poly: PolyCoeffs<T>,
    pub real_roots: usize,
    /// Real roots of the determinant, refined against direct evaluation.
    pub roots: Vec<T>,
    pub admissible_roots: usize,
    /// Standard deviation of the sample scanlines over `h`; small values mean
    /// weak observability of `k`.
    pub scanline_spread: T,
    /// `σ_min / σ_max` of the full ten-equation system at each returned model.
    pub null_ratios: Vec<T>,
}

#[derive(Debug, Clone)]
pub struct SolverOutput<T: Real> {
    /// Every admissible `(H, k)`, ordered by `σ_min / σ_max` of the full
    /// system. Each root makes the square system singular, so it fits four
    /// points and the fifth along its flow direction; the true one fits all
    /// five. Choosing among them is left to consensus scoring.
    pub models: Vec<RsDiffModel<T>>,
    pub diagnostics: Diagnostics<T>,
}

/// The five-point constraint system in normalized coordinates.
#[derive(Debug, Clone)]
pub struct FivePointSystem<T: Real> {
    sim: Similarity<T>,
    rs: RsParams<T>,
    /// Coefficient rows without the `H₃₃` column.
    rows: [[[T; 8]; 2]; 5],
    flows: [Vector2<T>; 5],
    affine: [(T, T); 5],
    spread: T,
}

impl<T: Real> FivePointSystem<T> {
    pub fn new(corrs: &[Correspondence<T>], rs: RsParams<T>) -> Result<Self> {
        if corrs.len() != 5 {
            return Err(Error::InvalidParameter(format!(
                "the 5-point solver takes exactly 5 correspondences, got {}",
                corrs.len()
            )));
        }
        rs.validate()?;
        if rs.gamma == T::zero() {
            return Err(Error::UnobservableAcceleration);
        }
        let (sim, norm) = hartley_normalize(corrs)?;
        let mut rows = [[[T::zero(); 8]; 2]; 5];
        let mut flows = [Vector2::zeros(); 5];
        let mut affine = [(T::zero(), T::zero()); 5];
        for i in 0..5 {
            let b = flow_coeff_rows(norm[i].p1);
            for r in 0..2 {
                for j in 0..8 {
                    rows[i][r][j] = b[(r, j)];
                }
            }
            flows[i] = norm[i].flow;
            affine[i] = beta_affine_parts(corrs[i].p1.y, corrs[i].y2(), &rs);
        }
        let mean = corrs.iter().fold(T::zero(), |a, c| a + c.p1.y) / T::lit(5.0);
        let var = corrs
            .iter()
            .fold(T::zero(), |a, c| a + (c.p1.y - mean) * (c.p1.y - mean))
            / T::lit(5.0);
        Ok(Self {
            sim,
            rs,
            rows,
            flows,
            affine,
            spread: var.sqrt() / rs.height,
        })
    }

    pub fn rs(&self) -> &RsParams<T> {
        &self.rs
    }

    fn equation(&self, i: usize, r: usize, k: T) -> [T; 9] {
        let (a, c) = self.affine[i];
        let beta = a + c * k;
        let mut out = [T::zero(); 9];
        for j in 0..8 {
            out[j] = beta * self.rows[i][r][j];
        }
        out[8] = -self.flows[i][r] * (T::lit(2.0) + k) * T::lit(0.5);
        out
    }

    /// The square 9×9 system at `k`.
    pub fn minor(&self, k: T) -> DMatrix<T> {
        let mut m = DMatrix::<T>::zeros(9, 9);
        for i in 0..4 {
            for r in 0..2 {
                let e = self.equation(i, r, k);
                for j in 0..9 {
                    m[(2 * i + r, j)] = e[j];
                }
            }
        }
        let u = self.flows[4];
        let dir = if u.norm() > T::eps() {
            u / u.norm()
        } else {
            Vector2::new(T::one(), T::zero())
        };
        let ex = self.equation(4, 0, k);
        let ey = self.equation(4, 1, k);
        for j in 0..9 {
            m[(8, j)] = dir.x * ex[j] + dir.y * ey[j];
        }
        m
    }

    /// All ten equations at `k`.
    pub fn full(&self, k: T) -> DMatrix<T> {
        let mut m = DMatrix::<T>::zeros(10, 9);
        for i in 0..5 {
            for r in 0..2 {
                let e = self.equation(i, r, k);
                for j in 0..9 {
                    m[(2 * i + r, j)] = e[j];
                }
            }
        }
        m
    }

    /// `det` of [`Self::minor`], computed directly.
    pub fn determinant(&self, k: T) -> T {
        self.minor(k).lu().determinant()
    }

    /// Determinant polynomial over `range` by interpolation at ten nodes.
    pub fn determinant_poly(&self, range: &KRange<T>) -> Option<PolyCoeffs<T>> {
        PolyCoeffs::interpolate(range.lo, range.hi, 9, |k| self.determinant(k))
    }

    /// Real roots of `det(M₀ + k M₁)` as eigenvalues of the pencil.
    ///
    /// With `N = M(k₀)⁻¹ M₁`, every eigenvalue `μ ≠ 0` gives the root
    /// `k = k₀ - 1/μ`. This is the same root set as the determinant
    /// polynomial but avoids its cancellation: over wide `k` ranges the
    /// monomial coefficients exceed the values near the roots by many orders
    /// of magnitude.
    pub fn pencil_roots(&self, range: &KRange<T>) -> Vec<T> {
        let slope = self.minor(T::one()) - self.minor(T::zero());
        let width = range.hi - range.lo;
        for frac in [0.5, 0.3819660112501051, 0.7236067977499790, 0.1458980337503155] {
            let k0 = range.lo + width * T::lit(frac);
            let Some(inv) = self.minor(k0).try_inverse() else {
                continue;
            };
            let n = inv * &slope;
            if !n.iter().all(|v| v.is_finite()) {
                continue;
            }
            let mut roots = Vec::new();
            for mu in n.complex_eigenvalues().iter() {
                let m2 = mu.re * mu.re + mu.im * mu.im;
                if !(m2 > T::eps() * T::eps()) {
                    continue;
                }
                // -1/μ = -(re - i·im)/|μ|²
                let re = k0 - mu.re / m2;
                let im = mu.im / m2;
                if im.abs() <= T::lit(1e-8).max(T::eps().sqrt()) * (T::one() + re.abs()) {
                    roots.push(re);
                }
            }
            roots.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
            return roots;
        }
        Vec::new()
    }

    /// Sharpens a root against the directly evaluated determinant. Roots
    /// without a sign change nearby are returned unchanged.
    pub fn refine_root(&self, k: T) -> T {
        let f = |x: T| self.determinant(x);
        let fk = f(k);
        if fk == T::zero() {
            return k;
        }
        let mut delta = T::lit(1e-7) * (T::one() + k.abs());
        for _ in 0..4 {
            let (a, b) = (k - delta, k + delta);
            if a > T::lit(-2.0) {
                let (fa, fb) = (f(a), f(b));
                let bracket = if fa * fk < T::zero() {
                    Some((a, k, fa, fk))
                } else if fk * fb < T::zero() {
                    Some((k, b, fk, fb))
                } else {
                    None
                };
                if let Some((a, b, fa, fb)) = bracket {
                    return illinois(f, a, b, fa, fb);
                }
            }
            delta *= T::lit(10.0);
        }
        k
    }

    /// Product of row norms of the minor: an upper bound on `|det|`.
    fn hadamard_bound(&self, k: T) -> T {
        let m = self.minor(k);
        (0..9).fold(T::one(), |acc, r| acc * m.row(r).norm())
    }

    /// `(H, σ_min/σ_max)` from the least-squares null vector at `k`, or
    /// `None` when the vector has no usable last component.
    pub fn extract(&self, k: T) -> Option<(Homography<T>, T)> {
        let svd = sorted_svd(self.full(k), false)?;
        let v = svd.right.last()?;
        let ratio = *svd.values.last()? / svd.values[0];
        let last = v[8];
        if !(last.abs() > T::lit(1e-10).max(T::eps() * T::lit(100.0))) {
            return None;
        }
        let mut h = [T::zero(); 9];
        for j in 0..8 {
            h[j] = v[j] / last;
        }
        let hn = Homography(Matrix3::from_row_slice(&h));
        Some((self.sim.denormalize_differential(&hn), ratio))
    }
}

/// Constant-acceleration 5-point solver by the hidden-variable technique.
pub fn solve_rs_constacc_5pt<T: Real>(
    corrs: &[Correspondence<T>],
    rs: RsParams<T>,
    k_range: KRange<T>,
) -> Result<SolverOutput<T>> {
    let sys = FivePointSystem::new(corrs, rs)?;
    let raw = sys
        .determinant_poly(&k_range)
        .ok_or_else(|| Error::DegenerateSample("interpolation system is singular".into()))?;
    let scale = sys.hadamard_bound((k_range.lo + k_range.hi) * T::lit(0.5));
    if !(raw.max_abs_coeff() > scale * T::eps() * T::lit(1e3)) {
        return Err(Error::DegenerateSample(
            "determinant vanishes for every k".into(),
        ));
    }
    let poly = raw.trimmed(T::lit(1e-12).max(T::eps() * T::lit(100.0)));
    let roots: Vec<T> = sys
        .pencil_roots(&k_range)
        .into_iter()
        .map(|k| sys.refine_root(k))
        .collect();
    let admissible: Vec<T> = roots.iter().copied().filter(|&k| k_range.contains(k)).collect();

    let mut scored: Vec<(RsDiffModel<T>, T)> = admissible
        .iter()
        .filter_map(|&k| {
            let (h, ratio) = sys.extract(k)?;
            RsDiffModel::new(h, k, rs).ok().map(|m| (m, ratio))
        })
        .collect();
    // most consistent with all ten equations first
    scored.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
    let (models, null_ratios): (Vec<_>, Vec<_>) = scored.into_iter().unzip();
    let diagnostics = Diagnostics {
        real_roots: roots.len(),
        roots,
        admissible_roots: admissible.len(),
        scanline_spread: sys.spread,
        null_ratios,
        poly,
    };
    if models.is_empty() {
        return Err(Error::NoSolution {
            lo: k_range.lo.as_f64(),
            hi: k_range.hi.as_f64(),
        });
    }
    Ok(SolverOutput {
        models,
        diagnostics,
    })
}

/// Least-squares constant-acceleration fit on any number of correspondences.
///
/// For fixed `k` the problem is linear in `h`, so `k` is found by a 1-D
/// search on the linear residual: a grid over `k_range` (or a window around
/// `k_hint`) followed by golden-section refinement.
pub fn solve_rs_constacc_lsq<T: Real>(
    corrs: &[Correspondence<T>],
    rs: RsParams<T>,
    k_range: KRange<T>,
    k_hint: Option<T>,
) -> Result<RsDiffModel<T>> {
    rs.validate()?;
    if rs.gamma == T::zero() {
        return Err(Error::UnobservableAcceleration);
    }
    let sys = DifferentialSystem::new(corrs)?;
    let cost = |k: T| -> T {
        let betas = observed_betas(corrs, k, &rs);
        sys.solve(&betas, None)
            .map(|f| f.residual)
            .unwrap_or_else(|_| T::max_value().unwrap_or(T::one() / T::eps()))
    };

    let (lo, hi, n) = match k_hint {
        Some(h) if h.is_finite() => {
            let w = T::lit(0.25);
            ((h - w).max(k_range.lo), (h + w).min(k_range.hi), 21)
        }
        _ => (k_range.lo, k_range.hi, 121),
    };
    let step = (hi - lo) / T::from_count(n - 1);
    let grid: Vec<T> = (0..n).map(|i| lo + step * T::from_count(i)).collect();
    let vals: Vec<T> = grid.iter().map(|&k| cost(k)).collect();
    let best = (0..n)
        .min_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap_or(std::cmp::Ordering::Equal))
        .unwrap_or(0);
    let a = grid[best.saturating_sub(1)];
    let b = grid[(best + 1).min(n - 1)];
    let k = golden_section(&cost, a, b, T::lit(1e-13).max(T::eps() * T::lit(10.0)));
    let k = polish_minimum(&cost, k, a, b);

    let betas = observed_betas(corrs, k, &rs);
    let fit = sys.solve(&betas, None)?;
    RsDiffModel::new(fit.h, k, rs)
}

fn illinois<T: Real, F: Fn(T) -> T>(f: F, mut a: T, mut b: T, mut fa: T, mut fb: T) -> T {
    for _ in 0..100 {
        let c = b - fb * (b - a) / (fb - fa);
        if !c.is_finite() {
            break;
        }
        let fc = f(c);
        if fc == T::zero() {
            return c;
        }
        if fc * fb < T::zero() {
            a = b;
            fa = fb;
        } else {
            fa *= T::lit(0.5);
        }
        b = c;
        fb = fc;
        if (b - a).abs() <= T::eps() * T::lit(4.0) * (T::one() + b.abs()) {
            break;
        }
    }
    b
}

/// Golden section leaves the minimizer of a flat cost uncertain at the
/// `sqrt(eps)` level. The root of the symmetric difference quotient is a
/// well-conditioned function of the data, so solve for it instead.
fn polish_minimum<T: Real, F: Fn(T) -> T>(cost: &F, k0: T, lo: T, hi: T) -> T {
    let delta = T::lit(1e-5);
    let slope = |k: T| cost(k + delta) - cost(k - delta);
    let mut w = T::lit(1e-6);
    for _ in 0..8 {
        let (a, b) = ((k0 - w).max(lo), (k0 + w).min(hi));
        let (fa, fb) = (slope(a), slope(b));
        if fa < T::zero() && fb > T::zero() {
            let k = illinois(slope, a, b, fa, fb);
            return if cost(k) <= cost(k0) * (T::one() + T::lit(1e-9)) { k } else { k0 };
        }
        w *= T::lit(10.0);
    }
    k0
}

fn golden_section<T: Real, F: Fn(T) -> T>(f: F, mut a: T, mut b: T, tol: T) -> T {
    let inv_phi = T::lit(0.618_033_988_749_894_8);
    let mut c = b - (b - a) * inv_phi;
    let mut d = a + (b - a) * inv_phi;
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..200 {
        if (b - a).abs() <= tol * (T::one() + a.abs().max(b.abs())) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - (b - a) * inv_phi;
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + (b - a) * inv_phi;
            fd = f(d);
        }
    }
    if fc < fd {
        c
    } else {
        d
    }
}
