//! Spatially-varying homography fields.
//!
//! Each grid cell solves the weighted problem with weights
//! `w_i(x) = max(exp(-‖x - x_i‖²/σ²), τ)` evaluated at the cell center. All
//! cells share one normalization so they live in one coordinate frame, and the
//! rolling-shutter field shares a single acceleration `k`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{check_acceleration, Correspondence, Homography, Pixel, RsDiffModel, RsParams};
use crate::robust::Model;
use crate::scalar::Real;
use crate::solvers::{observed_betas, DifferentialSystem, DiscreteSystem};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightParams<T> {
    /// Gaussian scale in pixels.
    pub sigma: T,
    /// Weight floor in `(0, 1]`.
    pub tau: T,
    /// Grid cell edge in pixels.
    pub cell: usize,
}

impl<T: Real> WeightParams<T> {
    pub fn new(sigma: T, tau: T, cell: usize) -> Result<Self> {
        let wp = Self { sigma, tau, cell };
        wp.validate()?;
        Ok(wp)
    }

    /// `σ = 0.1 × diagonal`, `τ = 0.0025`, 40 px cells.
    pub fn for_image(width: usize, height: usize) -> Self {
        let diag = ((width * width + height * height) as f64).sqrt();
        Self {
            sigma: T::lit(0.1 * diag),
            tau: T::lit(0.0025),
            cell: 40,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > T::zero()) {
            return Err(Error::InvalidParameter("sigma must be positive".into()));
        }
        if !(self.tau > T::zero() && self.tau <= T::one()) {
            return Err(Error::InvalidParameter("tau must lie in (0, 1]".into()));
        }
        if self.cell == 0 {
            return Err(Error::InvalidParameter("cell size must be at least 1 px".into()));
        }
        Ok(())
    }
}

/// `max(exp(-‖x - xi‖²/σ²), τ)`.
#[inline]
pub fn weight<T: Real>(x: Pixel<T>, xi: Pixel<T>, wp: &WeightParams<T>) -> T {
    let dx = x.x - xi.x;
    let dy = x.y - xi.y;
    (-(dx * dx + dy * dy) / (wp.sigma * wp.sigma)).exp().max(wp.tau)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FieldMode<T> {
    /// Discrete homographies, one weighted DLT per cell.
    GsDiscrete,
    /// Global-shutter differential homographies.
    GsDifferential,
    /// Rolling-shutter differential homographies with shared `k`.
    RsDifferential { k: T },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldKind {
    GsDiscrete,
    GsDifferential,
    RsDifferential,
}

/// Regular grid over the frame-1 image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub width: usize,
    pub height: usize,
    pub cell: usize,
    pub cols: usize,
    pub rows: usize,
}

impl GridGeometry {
    pub fn new(width: usize, height: usize, cell: usize) -> Self {
        let cell = cell.max(1);
        Self {
            width,
            height,
            cell,
            cols: width.div_ceil(cell).max(1),
            rows: height.div_ceil(cell).max(1),
        }
    }

    pub fn len(&self) -> usize {
        self.cols * self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn center<T: Real>(&self, index: usize) -> Pixel<T> {
        let (c, r) = (index % self.cols, index / self.cols);
        let half = self.cell as f64 * 0.5;
        Pixel::new(
            T::lit((c * self.cell) as f64 + half - 0.5),
            T::lit((r * self.cell) as f64 + half - 0.5),
        )
    }

    /// Cell containing `p`; positions outside the image use the nearest cell.
    pub fn index_of<T: Real>(&self, p: Pixel<T>) -> usize {
        let clamp = |v: f64, n: usize| -> usize {
            if v.is_nan() || v < 0.0 {
                0
            } else {
                ((v / self.cell as f64) as usize).min(n - 1)
            }
        };
        let c = clamp(p.x.as_f64() + 0.5, self.cols);
        let r = clamp(p.y.as_f64() + 0.5, self.rows);
        r * self.cols + c
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WarpField<T: Real> {
    pub grid: GridGeometry,
    pub kind: FieldKind,
    pub cells: Vec<Homography<T>>,
    /// Uniform-weight model over the same inliers.
    pub global: Homography<T>,
    pub k: T,
    pub rs: RsParams<T>,
    pub weights: WeightParams<T>,
    /// Cells whose weighted system was degenerate and hold the global model.
    pub fallback_cells: Vec<usize>,
    /// `σ₈ / σ₁` of each cell's weighted system.
    pub conditioning: Vec<T>,
    pub inlier_count: usize,
}

impl<T: Real> WarpField<T> {
    fn wrap(&self, h: Homography<T>) -> Model<T> {
        match self.kind {
            FieldKind::GsDiscrete => Model::Discrete(h),
            FieldKind::GsDifferential | FieldKind::RsDifferential => {
                Model::Differential(RsDiffModel { h, k: self.k, rs: self.rs })
            }
        }
    }

    pub fn cell_model(&self, index: usize) -> Model<T> {
        self.wrap(self.cells[index])
    }

    /// Model of the cell containing `p`.
    pub fn model_at(&self, p: Pixel<T>) -> Model<T> {
        self.cell_model(self.grid.index_of(p))
    }

    pub fn global_model(&self) -> Model<T> {
        self.wrap(self.global)
    }

    pub fn to_file(&self) -> FieldFile {
        let mat = |h: &Homography<T>| h.to_row_major().map(|v| v.as_f64());
        FieldFile {
            kind: self.kind,
            grid: self.grid,
            k: self.k.as_f64(),
            gamma: self.rs.gamma.as_f64(),
            h: self.rs.height.as_f64(),
            sigma: self.weights.sigma.as_f64(),
            tau: self.weights.tau.as_f64(),
            global: mat(&self.global),
            cells: self.cells.iter().map(mat).collect(),
            fallback_cells: self.fallback_cells.clone(),
            conditioning: self.conditioning.iter().map(|c| c.as_f64()).collect(),
            inlier_count: self.inlier_count,
        }
    }

    pub fn from_file(f: &FieldFile) -> Result<Self> {
        if f.cells.len() != f.grid.len() {
            return Err(Error::InvalidParameter(format!(
                "field has {} cells for a {}x{} grid",
                f.cells.len(),
                f.grid.cols,
                f.grid.rows
            )));
        }
        let mat = |a: &[f64; 9]| Homography::from_row_major(&a.map(T::lit));
        let k = T::lit(f.k);
        check_acceleration(k)?;
        Ok(Self {
            grid: f.grid,
            kind: f.kind,
            cells: f.cells.iter().map(mat).collect(),
            global: mat(&f.global),
            k,
            rs: RsParams::new(T::lit(f.gamma), T::lit(f.h))?,
            weights: WeightParams::new(T::lit(f.sigma), T::lit(f.tau), f.grid.cell)?,
            fallback_cells: f.fallback_cells.clone(),
            conditioning: f.conditioning.iter().map(|&c| T::lit(c)).collect(),
            inlier_count: f.inlier_count,
        })
    }
}

/// On-disk form of a [`WarpField`]; matrices are row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldFile {
    pub kind: FieldKind,
    pub grid: GridGeometry,
    pub k: f64,
    pub gamma: f64,
    pub h: f64,
    pub sigma: f64,
    pub tau: f64,
    pub global: [f64; 9],
    pub cells: Vec<[f64; 9]>,
    pub fallback_cells: Vec<usize>,
    pub conditioning: Vec<f64>,
    pub inlier_count: usize,
}

impl FieldFile {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("field serializes")
    }

    pub fn from_json(s: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

/// Builds a grid of weighted homographies from inlier correspondences.
///
/// `rs` supplies the scanline count (and `γ` for the rolling-shutter mode).
pub fn build_apap_field<T: Real>(
    inliers: &[Correspondence<T>],
    mode: FieldMode<T>,
    wp: WeightParams<T>,
    width: usize,
    height: usize,
    rs: RsParams<T>,
) -> Result<WarpField<T>> {
    wp.validate()?;
    rs.validate()?;
    if width == 0 || height == 0 {
        return Err(Error::InvalidParameter("image extent must be non-empty".into()));
    }
    let grid = GridGeometry::new(width, height, wp.cell);
    let centers: Vec<Pixel<T>> = (0..grid.len()).map(|i| grid.center(i)).collect();
    let cell_weights = |c: Pixel<T>| -> Vec<T> { inliers.iter().map(|x| weight(c, x.p1, &wp)).collect() };

    let (kind, k, rs, global, solved): (FieldKind, T, RsParams<T>, Homography<T>, Vec<Result<(Homography<T>, T)>>) =
        match mode {
            FieldMode::GsDiscrete => {
                let sys = DiscreteSystem::new(inliers)?;
                let global = sys.solve(None)?;
                let solved = centers
                    .par_iter()
                    .map(|&c| sys.solve_conditioned(Some(&cell_weights(c))))
                    .collect();
                (FieldKind::GsDiscrete, T::zero(), RsParams::global(rs.height), global, solved)
            }
            FieldMode::GsDifferential | FieldMode::RsDifferential { .. } => {
                let (kind, k, rs) = match mode {
                    FieldMode::RsDifferential { k } => {
                        check_acceleration(k)?;
                        (FieldKind::RsDifferential, k, rs)
                    }
                    _ => (FieldKind::GsDifferential, T::zero(), RsParams::global(rs.height)),
                };
                let sys = DifferentialSystem::new(inliers)?;
                let betas = match kind {
                    FieldKind::RsDifferential => observed_betas(inliers, k, &rs),
                    _ => vec![T::one(); inliers.len()],
                };
                let global = sys.solve(&betas, None)?.h;
                let solved = centers
                    .par_iter()
                    .map(|&c| {
                        sys.solve(&betas, Some(&cell_weights(c)))
                            .map(|f| (f.h, f.conditioning))
                    })
                    .collect();
                (kind, k, rs, global, solved)
            }
        };

    let mut cells = Vec::with_capacity(grid.len());
    let mut conditioning = Vec::with_capacity(grid.len());
    let mut fallback_cells = Vec::new();
    for (i, r) in solved.into_iter().enumerate() {
        match r {
            Ok((h, c)) if h.is_finite() => {
                cells.push(h);
                conditioning.push(c);
            }
            _ => {
                cells.push(global);
                conditioning.push(T::zero());
                fallback_cells.push(i);
            }
        }
    }
    Ok(WarpField {
        grid,
        kind,
        cells,
        global,
        k,
        rs,
        weights: wp,
        fallback_cells,
        conditioning,
        inlier_count: inliers.len(),
    })
}
