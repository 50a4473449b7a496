use std::path::Path;

use image::{DynamicImage, GrayImage, ImageBuffer, Luma, Rgb, RgbImage};

use crate::error::{Error, Result};

/// 8-bit image with 1 or 3 interleaved channels and an optional validity mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<u8>,
    mask: Option<Vec<bool>>,
}

impl Raster {
    pub fn new(width: usize, height: usize, channels: usize) -> Result<Self> {
        Self::from_data(width, height, channels, vec![0; width * height * channels])
    }

    pub fn filled(width: usize, height: usize, value: &[u8]) -> Result<Self> {
        let mut r = Self::new(width, height, value.len())?;
        for px in r.data.chunks_exact_mut(value.len()) {
            px.copy_from_slice(value);
        }
        Ok(r)
    }

    pub fn from_data(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Dimension(format!("empty raster {width}x{height}")));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::Dimension(format!("{channels} channels, expected 1 or 3")));
        }
        if data.len() != width * height * channels {
            return Err(Error::Dimension(format!(
                "{} samples for a {width}x{height}x{channels} raster",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
            mask: None,
        })
    }

    /// Grayscale raster from a function of the pixel position.
    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> u8) -> Result<Self> {
        let data = (0..width * height).map(|i| f(i % width, i / width)).collect();
        Self::from_data(width, height, 1, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn mask(&self) -> Option<&[bool]> {
        self.mask.as_deref()
    }

    pub fn with_mask(mut self, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != self.width * self.height {
            return Err(Error::Dimension("mask size differs from raster".into()));
        }
        self.mask = Some(mask);
        Ok(self)
    }

    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        self.mask.as_ref().is_none_or(|m| m[y * self.width + x])
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[u8] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    pub fn pixel_mut(&mut self, x: usize, y: usize) -> &mut [u8] {
        let i = (y * self.width + x) * self.channels;
        &mut self.data[i..i + self.channels]
    }

    /// Luma by Rec. 601 weights; grayscale rasters are returned as is.
    pub fn to_gray(&self) -> Raster {
        if self.channels == 1 {
            return self.clone();
        }
        let data = self
            .data
            .chunks_exact(3)
            .map(|p| (0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64).round() as u8)
            .collect();
        Raster {
            width: self.width,
            height: self.height,
            channels: 1,
            data,
            mask: self.mask.clone(),
        }
    }

    pub fn to_rgb(&self) -> Raster {
        if self.channels == 3 {
            return self.clone();
        }
        Raster {
            width: self.width,
            height: self.height,
            channels: 3,
            data: self.data.iter().flat_map(|&v| [v, v, v]).collect(),
            mask: self.mask.clone(),
        }
    }

    /// Bilinear sample at pixel-center coordinates; `None` outside the
    /// valid area or when a contributing pixel is masked out.
    pub fn sample(&self, x: f64, y: f64, out: &mut [f64]) -> bool {
        // round-off from the point maps must not drop border pixels
        const SNAP: f64 = 1e-6;
        let (xm, ym) = ((self.width - 1) as f64, (self.height - 1) as f64);
        let x = if x < 0.0 && x >= -SNAP { 0.0 } else if x > xm && x <= xm + SNAP { xm } else { x };
        let y = if y < 0.0 && y >= -SNAP { 0.0 } else if y > ym && y <= ym + SNAP { ym } else { y };
        if !(x >= 0.0 && y >= 0.0 && x <= (self.width - 1) as f64 && y <= (self.height - 1) as f64) {
            return false;
        }
        let x0 = (x.floor() as usize).min(self.width - 1);
        let y0 = (y.floor() as usize).min(self.height - 1);
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let (fx, fy) = (x - x0 as f64, y - y0 as f64);
        if self.mask.is_some()
            && !(self.is_valid(x0, y0) && self.is_valid(x1, y0) && self.is_valid(x0, y1) && self.is_valid(x1, y1))
        {
            return false;
        }
        for (c, o) in out.iter_mut().enumerate().take(self.channels) {
            let v = |xx: usize, yy: usize| self.data[(yy * self.width + xx) * self.channels + c] as f64;
            let top = v(x0, y0) * (1.0 - fx) + v(x1, y0) * fx;
            let bot = v(x0, y1) * (1.0 - fx) + v(x1, y1) * fx;
            *o = top * (1.0 - fy) + bot * fy;
        }
        true
    }

    pub fn load_png(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let img = image::open(path).map_err(|e| Error::Image(format!("{}: {e}", path.display())))?;
        match img {
            DynamicImage::ImageLuma8(g) => {
                let (w, h) = g.dimensions();
                Self::from_data(w as usize, h as usize, 1, g.into_raw())
            }
            other => {
                let rgb = other.to_rgb8();
                let (w, h) = rgb.dimensions();
                Self::from_data(w as usize, h as usize, 3, rgb.into_raw())
            }
        }
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let (w, h) = (self.width as u32, self.height as u32);
        let res = if self.channels == 1 {
            let buf: GrayImage = ImageBuffer::<Luma<u8>, _>::from_raw(w, h, self.data.clone())
                .ok_or_else(|| Error::Dimension("raster buffer size".into()))?;
            buf.save(path)
        } else {
            let buf: RgbImage = ImageBuffer::<Rgb<u8>, _>::from_raw(w, h, self.data.clone())
                .ok_or_else(|| Error::Dimension("raster buffer size".into()))?;
            buf.save(path)
        };
        res.map_err(|e| Error::Image(format!("{}: {e}", path.display())))
    }

    /// Mask as a black/white grayscale raster.
    pub fn mask_raster(&self) -> Raster {
        let data = match &self.mask {
            Some(m) => m.iter().map(|&v| if v { 255 } else { 0 }).collect(),
            None => vec![255; self.width * self.height],
        };
        Raster {
            width: self.width,
            height: self.height,
            channels: 1,
            data,
            mask: None,
        }
    }
}
