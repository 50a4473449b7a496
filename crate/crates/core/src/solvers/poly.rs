//! Univariate polynomials recovered by interpolation, with companion-matrix
//! root finding.

use nalgebra::{DMatrix, DVector};

use crate::scalar::Real;

/// A real polynomial `p(k) = Σ c_i t^i` expressed in the scaled variable
/// `t = (k - center) / half_width`, coefficients ascending.
///
/// Working in `t ∈ [-1, 1]` keeps the monomial basis well conditioned over
/// wide `k` intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyCoeffs<T: Real> {
    pub coeffs: Vec<T>,
    pub center: T,
    pub half_width: T,
}

impl<T: Real> PolyCoeffs<T> {
    /// Interpolates `f` at `degree + 1` Chebyshev nodes over `[lo, hi]`.
    pub fn interpolate<F: FnMut(T) -> T>(lo: T, hi: T, degree: usize, mut f: F) -> Option<Self> {
        let n = degree + 1;
        let center = (lo + hi) * T::lit(0.5);
        let half_width = (hi - lo) * T::lit(0.5);
        let mut v = DMatrix::<T>::zeros(n, n);
        let mut rhs = DVector::<T>::zeros(n);
        for j in 0..n {
            let t = T::lit(
                (std::f64::consts::PI * (j as f64 + 0.5) / n as f64).cos(),
            );
            let mut p = T::one();
            for i in 0..n {
                v[(j, i)] = p;
                p *= t;
            }
            rhs[j] = f(center + half_width * t);
        }
        let c = v.lu().solve(&rhs)?;
        Some(Self {
            coeffs: c.iter().copied().collect(),
            center,
            half_width,
        })
    }

    #[inline]
    pub fn to_scaled(&self, k: T) -> T {
        (k - self.center) / self.half_width
    }

    #[inline]
    pub fn from_scaled(&self, t: T) -> T {
        self.center + self.half_width * t
    }

    fn eval_scaled(&self, t: T) -> T {
        self.coeffs.iter().rev().fold(T::zero(), |acc, &c| acc * t + c)
    }

    fn eval_scaled_with_derivative(&self, t: T) -> (T, T) {
        let mut p = T::zero();
        let mut dp = T::zero();
        for &c in self.coeffs.iter().rev() {
            dp = dp * t + p;
            p = p * t + c;
        }
        (p, dp)
    }

    /// `p(k)`.
    pub fn eval(&self, k: T) -> T {
        self.eval_scaled(self.to_scaled(k))
    }

    pub fn max_abs_coeff(&self) -> T {
        self.coeffs.iter().fold(T::zero(), |m, c| m.max(c.abs()))
    }

    /// Drops leading coefficients below `rel · max|c|`.
    pub fn trimmed(mut self, rel: T) -> Self {
        let floor = self.max_abs_coeff() * rel;
        while self.coeffs.len() > 1 && self.coeffs.last().is_some_and(|c| c.abs() <= floor) {
            self.coeffs.pop();
        }
        self
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    /// All roots in `t` as `(re, im)` pairs, from the companion matrix.
    fn complex_roots_scaled(&self) -> Vec<(T, T)> {
        let deg = self.degree();
        if deg == 0 {
            return Vec::new();
        }
        let lead = self.coeffs[deg];
        if deg == 1 {
            return vec![(-self.coeffs[0] / lead, T::zero())];
        }
        let mut comp = DMatrix::<T>::zeros(deg, deg);
        for i in 1..deg {
            comp[(i, i - 1)] = T::one();
        }
        for i in 0..deg {
            comp[(i, deg - 1)] = -self.coeffs[i] / lead;
        }
        comp.complex_eigenvalues()
            .iter()
            .map(|z| (z.re, z.im))
            .collect()
    }

    /// Real roots in `k`, polished by Newton on the polynomial.
    ///
    /// A root counts as real when `|Im k| ≤ imag_tol · (1 + |k|)`.
    pub fn real_roots(&self, imag_tol: T) -> Vec<T> {
        let mut out = Vec::new();
        for (re, im) in self.complex_roots_scaled() {
            let k_re = self.from_scaled(re);
            let k_im = im * self.half_width;
            if k_im.abs() > imag_tol * (T::one() + k_re.abs()) {
                continue;
            }
            out.push(self.from_scaled(self.polish(re)));
        }
        out.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        out
    }

    fn polish(&self, t0: T) -> T {
        let mut t = t0;
        let (mut best_val, _) = self.eval_scaled_with_derivative(t);
        for _ in 0..8 {
            let (p, dp) = self.eval_scaled_with_derivative(t);
            if dp == T::zero() || !dp.is_finite() {
                break;
            }
            let next = t - p / dp;
            let (np, _) = self.eval_scaled_with_derivative(next);
            if !(np.abs() < best_val.abs()) {
                break;
            }
            best_val = np;
            t = next;
        }
        t
    }
}
