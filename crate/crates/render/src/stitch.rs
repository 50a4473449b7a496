//! Inverse-warp compositing onto a shared canvas.
//!
//! Every source carries two point maps: canvas → source, used to pull
//! samples, and source → canvas, used only to bound the canvas by mapping a
//! ring of boundary points (straight edges bend under rolling shutter, so
//! corners alone are not enough).

use std::path::Path;

use rayon::prelude::*;
use rsstitch_core::Pixel;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mapping::{Extent, WarpModel};
use crate::raster::Raster;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BlendMode {
    /// Feathering weighted by distance to the source border.
    Linear,
    /// Later sources cover earlier ones.
    Overlay,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StitchOptions {
    pub blend: BlendMode,
    /// Render into the rectified canvas of the reference frame.
    pub rectify: bool,
    /// Reference frame index for [`chain_pairwise`].
    pub reference: usize,
    /// Spacing of boundary samples used to bound the canvas, in pixels.
    pub ring_step: f64,
    /// Canvas area cap as a multiple of the summed source areas.
    pub max_area_ratio: f64,
}

impl Default for StitchOptions {
    fn default() -> Self {
        Self {
            blend: BlendMode::Linear,
            rectify: false,
            reference: 0,
            ring_step: 2.0,
            max_area_ratio: 16.0,
        }
    }
}

/// Composited output. Canvas pixel `(i, j)` sits at reference coordinates
/// `(offset.0 + i, offset.1 + j)`.
#[derive(Debug, Clone)]
pub struct Canvas {
    pub offset: (f64, f64),
    pub image: Raster,
    /// Each source resampled onto the canvas, masked to its coverage.
    pub layers: Vec<Raster>,
    /// Overlap discrepancy: green where sources agree, red where they differ.
    pub diff: Raster,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceMeta {
    pub index: usize,
    pub coverage: usize,
    /// Run lengths over the row-major mask, alternating and starting with
    /// uncovered pixels.
    pub mask_runs: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanvasMeta {
    pub offset: [f64; 2],
    pub width: usize,
    pub height: usize,
    pub rectified: bool,
    pub sources: Vec<SourceMeta>,
    pub warnings: Vec<String>,
}

fn runs(mask: &[bool]) -> Vec<u32> {
    let mut out = Vec::new();
    let mut cur = false;
    let mut n = 0u32;
    for &m in mask {
        if m == cur {
            n += 1;
        } else {
            out.push(n);
            cur = m;
            n = 1;
        }
    }
    out.push(n);
    out
}

/// Expands run lengths back into a mask.
pub fn mask_from_runs(runs: &[u32]) -> Vec<bool> {
    runs.iter()
        .enumerate()
        .flat_map(|(i, &n)| std::iter::repeat_n(i % 2 == 1, n as usize))
        .collect()
}

impl Canvas {
    pub fn width(&self) -> usize {
        self.image.width()
    }

    pub fn height(&self) -> usize {
        self.image.height()
    }

    pub fn meta(&self, rectified: bool) -> CanvasMeta {
        CanvasMeta {
            offset: [self.offset.0, self.offset.1],
            width: self.width(),
            height: self.height(),
            rectified,
            sources: self
                .layers
                .iter()
                .enumerate()
                .map(|(index, l)| {
                    let m = l.mask().unwrap_or(&[]);
                    SourceMeta {
                        index,
                        coverage: m.iter().filter(|&&v| v).count(),
                        mask_runs: runs(m),
                    }
                })
                .collect(),
            warnings: self.warnings.clone(),
        }
    }

    pub fn write_sidecar(&self, path: impl AsRef<Path>, rectified: bool) -> Result<()> {
        let json = serde_json::to_string_pretty(&self.meta(rectified))?;
        std::fs::write(path, json)?;
        Ok(())
    }

    /// Pixels covered by at least two sources.
    pub fn overlap_mask(&self) -> Vec<bool> {
        let n = self.width() * self.height();
        (0..n)
            .map(|i| {
                self.layers
                    .iter()
                    .filter(|l| l.mask().is_some_and(|m| m[i]))
                    .count()
                    >= 2
            })
            .collect()
    }
}

type PointMap<'a> = Box<dyn Fn(Pixel) -> Option<Pixel> + Sync + 'a>;

struct Source<'a> {
    image: &'a Raster,
    from_canvas: PointMap<'a>,
    to_canvas: PointMap<'a>,
}

fn ring(width: usize, height: usize, step: f64) -> Vec<Pixel> {
    let (w, h) = ((width - 1) as f64, (height - 1) as f64);
    let mut pts = Vec::new();
    let along = |len: f64| -> Vec<f64> {
        let n = (len / step).ceil().max(1.0) as usize;
        (0..=n).map(|i| len * i as f64 / n as f64).collect()
    };
    for x in along(w) {
        pts.push(Pixel::new(x, 0.0));
        pts.push(Pixel::new(x, h));
    }
    for y in along(h) {
        pts.push(Pixel::new(0.0, y));
        pts.push(Pixel::new(w, y));
    }
    pts
}

fn bounds(sources: &[Source], step: f64, warnings: &mut Vec<String>) -> Result<(f64, f64, f64, f64)> {
    let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for (i, s) in sources.iter().enumerate() {
        let pts = ring(s.image.width(), s.image.height(), step);
        let mut mapped = 0;
        for q in pts.iter().filter_map(|&p| (s.to_canvas)(p)) {
            mapped += 1;
            x0 = x0.min(q.x);
            y0 = y0.min(q.y);
            x1 = x1.max(q.x);
            y1 = y1.max(q.y);
        }
        if mapped < pts.len() {
            warnings.push(format!("source {i}: {} boundary samples unmapped", pts.len() - mapped));
        }
    }
    if !(x0.is_finite() && y0.is_finite() && x1.is_finite() && y1.is_finite()) {
        return Err(Error::Invalid("no source maps onto the canvas".into()));
    }
    Ok((x0, y0, x1, y1))
}

fn render(sources: Vec<Source>, opts: &StitchOptions) -> Result<Canvas> {
    let mut warnings = Vec::new();
    let (bx0, by0, bx1, by1) = bounds(&sources, opts.ring_step, &mut warnings)?;
    let snap = 1e-6;
    let mut ox = (bx0 + snap).floor();
    let mut oy = (by0 + snap).floor();
    let mut w = ((bx1 - snap).ceil() - ox) as usize + 1;
    let mut h = ((by1 - snap).ceil() - oy) as usize + 1;

    let area: f64 = sources.iter().map(|s| (s.image.width() * s.image.height()) as f64).sum();
    let cap = opts.max_area_ratio * area;
    if (w * h) as f64 > cap {
        // keep the window around the first source's footprint
        let first = &sources[0];
        let scale = (cap / (w * h) as f64).sqrt();
        let nw = ((w as f64 * scale) as usize).max(first.image.width());
        let nh = ((h as f64 * scale) as usize).max(first.image.height());
        let c = (first.to_canvas)(Pixel::new(first.image.width() as f64 / 2.0, first.image.height() as f64 / 2.0))
            .unwrap_or(Pixel::new((bx0 + bx1) / 2.0, (by0 + by1) / 2.0));
        ox = (c.x - nw as f64 / 2.0).floor();
        oy = (c.y - nh as f64 / 2.0).floor();
        w = nw;
        h = nh;
        warnings.push(format!("canvas clipped to {w}x{h}"));
    }

    let channels = if sources.iter().any(|s| s.image.channels() == 3) { 3 } else { 1 };
    let converted: Vec<Raster> = sources
        .iter()
        .map(|s| if channels == 3 { s.image.to_rgb() } else { s.image.clone() })
        .collect();

    let mut layers = Vec::with_capacity(sources.len());
    let mut weights = Vec::with_capacity(sources.len());
    for (s, img) in sources.iter().zip(&converted) {
        let rows: Vec<(Vec<u8>, Vec<bool>, Vec<f32>)> = (0..h)
            .into_par_iter()
            .map(|j| {
                let mut data = vec![0u8; w * channels];
                let mut mask = vec![false; w];
                let mut wt = vec![0f32; w];
                let mut px = [0.0f64; 3];
                for i in 0..w {
                    let q = Pixel::new(ox + i as f64, oy + j as f64);
                    let Some(p) = (s.from_canvas)(q) else { continue };
                    if !img.sample(p.x, p.y, &mut px) {
                        continue;
                    }
                    for c in 0..channels {
                        data[i * channels + c] = px[c].round().clamp(0.0, 255.0) as u8;
                    }
                    mask[i] = true;
                    let edge = (p.x + 1.0)
                        .min(img.width() as f64 - p.x)
                        .min(p.y + 1.0)
                        .min(img.height() as f64 - p.y);
                    wt[i] = edge.max(1e-3) as f32;
                }
                (data, mask, wt)
            })
            .collect();
        let mut data = Vec::with_capacity(w * h * channels);
        let mut mask = Vec::with_capacity(w * h);
        let mut wt = Vec::with_capacity(w * h);
        for (d, m, ww) in rows {
            data.extend(d);
            mask.extend(m);
            wt.extend(ww);
        }
        layers.push(Raster::from_data(w, h, channels, data)?.with_mask(mask)?);
        weights.push(wt);
    }

    let n = w * h;
    let mut out = vec![0u8; n * channels];
    let mut cover = vec![false; n];
    let mut diff = vec![0u8; n * 3];
    let mut overlap = 0usize;
    for idx in 0..n {
        let mut acc = [0.0f64; 3];
        let mut wsum = 0.0f64;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut count = 0;
        for (l, wt) in layers.iter().zip(&weights) {
            if !l.mask().is_some_and(|m| m[idx]) {
                continue;
            }
            count += 1;
            let v = &l.data()[idx * channels..(idx + 1) * channels];
            let g = if channels == 3 {
                0.299 * v[0] as f64 + 0.587 * v[1] as f64 + 0.114 * v[2] as f64
            } else {
                v[0] as f64
            };
            lo = lo.min(g);
            hi = hi.max(g);
            match opts.blend {
                BlendMode::Linear => {
                    let ww = wt[idx] as f64;
                    for c in 0..channels {
                        acc[c] += ww * v[c] as f64;
                    }
                    wsum += ww;
                }
                BlendMode::Overlay => {
                    for c in 0..channels {
                        acc[c] = v[c] as f64;
                    }
                    wsum = 1.0;
                }
            }
        }
        if count == 0 {
            continue;
        }
        cover[idx] = true;
        for c in 0..channels {
            out[idx * channels + c] = (acc[c] / wsum).round().clamp(0.0, 255.0) as u8;
        }
        let d = &mut diff[idx * 3..idx * 3 + 3];
        if count >= 2 {
            overlap += 1;
            let r = ((hi - lo) * 4.0).round().clamp(0.0, 255.0) as u8;
            d.copy_from_slice(&[r, 255 - r, 0]);
        } else {
            let g = (lo / 3.0).round() as u8;
            d.copy_from_slice(&[g, g, g]);
        }
    }
    if sources.len() >= 2 && overlap == 0 {
        warnings.push("sources do not overlap".into());
    }
    Ok(Canvas {
        offset: (ox, oy),
        image: Raster::from_data(w, h, channels, out)?.with_mask(cover)?,
        layers,
        diff: Raster::from_data(w, h, 3, diff)?,
        warnings,
    })
}

fn check_same_size(a: &Raster, b: &Raster) -> Result<()> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(Error::Dimension(format!(
            "frames differ in size: {}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    Ok(())
}

/// Warps `img1` onto `img2` through `model` (frame 1 → frame 2) and blends.
///
/// Without rectification the canvas uses frame-2 coordinates; with it, both
/// frames are resampled onto the rectified canvas of frame 1.
pub fn warp_and_stitch(img1: &Raster, img2: &Raster, model: &WarpModel, opts: &StitchOptions) -> Result<Canvas> {
    check_same_size(img1, img2)?;
    let extent = Extent::new(img1.width(), img1.height());
    let sources = if opts.rectify && model.is_rolling_shutter() {
        vec![
            Source {
                image: img1,
                from_canvas: Box::new(move |g| model.canvas_to_frame1(g)),
                to_canvas: Box::new(move |p| model.rectify(p, &extent)),
            },
            Source {
                image: img2,
                from_canvas: Box::new(move |g| model.canvas_to_frame2(g)),
                to_canvas: Box::new(move |p| model.rectify_frame2(p, &extent)),
            },
        ]
    } else {
        vec![
            Source {
                image: img1,
                from_canvas: Box::new(move |q| model.inverse(q, &extent)),
                to_canvas: Box::new(move |p| model.forward(p)),
            },
            Source {
                image: img2,
                from_canvas: Box::new(Some),
                to_canvas: Box::new(Some),
            },
        ]
    };
    render(sources, opts)
}

/// Resamples a single frame onto its rectified canvas, using the model to
/// the next frame for the motion.
pub fn rectify_image(img: &Raster, model: &WarpModel, opts: &StitchOptions) -> Result<Canvas> {
    let extent = Extent::new(img.width(), img.height());
    let sources = vec![Source {
        image: img,
        from_canvas: Box::new(move |g| model.canvas_to_frame1(g)),
        to_canvas: Box::new(move |p| model.rectify(p, &extent)),
    }];
    render(sources, opts)
}

/// Maps a point of frame `from` into frame `to` through the pairwise chain.
pub fn chain_point(models: &[WarpModel], from: usize, to: usize, p: Pixel, extent: &Extent) -> Option<Pixel> {
    if from <= to {
        models[from..to].iter().try_fold(p, |q, m| m.forward(q))
    } else {
        models[to..from].iter().rev().try_fold(p, |q, m| m.inverse(q, extent))
    }
}

/// Stitches a frame sequence where `models[i]` maps frame `i` into `i + 1`.
///
/// Points are carried through the composed maps and every frame is sampled
/// once; `opts.reference` picks the canvas frame (default 0) and
/// `opts.rectify` renders into its rectified canvas.
pub fn chain_pairwise(frames: &[Raster], models: &[WarpModel], opts: &StitchOptions) -> Result<Canvas> {
    if frames.is_empty() {
        return Err(Error::Invalid("no frames".into()));
    }
    if models.len() + 1 != frames.len() {
        return Err(Error::Invalid(format!(
            "{} frames need {} pairwise models, got {}",
            frames.len(),
            frames.len() - 1,
            models.len()
        )));
    }
    for f in &frames[1..] {
        check_same_size(&frames[0], f)?;
    }
    let r = opts.reference;
    if r >= frames.len() {
        return Err(Error::Invalid(format!("reference frame {r} out of range")));
    }
    let rectify = opts.rectify && models.get(r).is_some_and(|m| m.is_rolling_shutter());
    if opts.rectify && !rectify && frames.len() > 1 && r + 1 == frames.len() {
        return Err(Error::Invalid("rectification needs a model leaving the reference frame".into()));
    }
    let extent = Extent::new(frames[0].width(), frames[0].height());
    let sources = frames
        .iter()
        .enumerate()
        .map(|(j, img)| {
            let from_canvas: PointMap = Box::new(move |g| {
                let q = if rectify { models[r].canvas_to_frame1(g)? } else { g };
                chain_point(models, r, j, q, &extent)
            });
            let to_canvas: PointMap = Box::new(move |p| {
                let q = chain_point(models, j, r, p, &extent)?;
                if rectify {
                    models[r].rectify(q, &extent)
                } else {
                    Some(q)
                }
            });
            Source {
                image: img,
                from_canvas,
                to_canvas,
            }
        })
        .collect();
    render(sources, opts)
}
