//! Plain-text correspondence files.
//!
//! ```text
//! # comments start with '#'
//! width 1280
//! height 720
//! gamma 1.0          # optional
//! pair clip3-0041    # optional
//! 412.5 300.25 415.0 301.5
//! ...
//! ```
//!
//! Header lines come first; each data row is `x1 y1 x2 y2` separated by
//! whitespace or commas.

use std::fmt::{self, Write as _};
use std::path::Path;

use rsstitch_core::geometry::default_flow_cap;
use rsstitch_core::{Correspondence, Pixel};

/// Fraction of the image size by which coordinates may leave the frame.
pub const MARGIN: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct CorrespondenceFile {
    pub width: usize,
    pub height: usize,
    pub gamma: Option<f64>,
    pub pair: Option<String>,
    pub corrs: Vec<Correspondence>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    /// 1-based; 0 for problems not tied to a line.
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            write!(f, "{}", self.message)
        } else {
            write!(f, "line {}: {}", self.line, self.message)
        }
    }
}

impl std::error::Error for ParseError {}

fn err(line: usize, message: impl Into<String>) -> ParseError {
    ParseError {
        line,
        message: message.into(),
    }
}

impl CorrespondenceFile {
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let (mut width, mut height, mut gamma, mut pair) = (None, None, None, None);
        let mut rows: Vec<(usize, [f64; 4])> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let n = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|s| !s.is_empty())
                .collect();
            let key = fields[0];
            if key.chars().next().is_some_and(|c| c.is_ascii_alphabetic()) {
                if !rows.is_empty() {
                    return Err(err(n, format!("header key `{key}` after data rows")));
                }
                if fields.len() != 2 {
                    return Err(err(n, format!("header `{key}` takes exactly one value")));
                }
                let value = fields[1];
                match key {
                    "width" | "height" => {
                        let v: usize = value
                            .parse()
                            .ok()
                            .filter(|v| *v > 0)
                            .ok_or_else(|| err(n, format!("{key} must be a positive integer, got `{value}`")))?;
                        if key == "width" {
                            width = Some(v);
                        } else {
                            height = Some(v);
                        }
                    }
                    "gamma" => {
                        let g: f64 = value
                            .parse()
                            .ok()
                            .filter(|g: &f64| (0.0..=1.0).contains(g))
                            .ok_or_else(|| err(n, format!("gamma must lie in [0, 1], got `{value}`")))?;
                        gamma = Some(g);
                    }
                    "pair" => pair = Some(value.to_string()),
                    other => return Err(err(n, format!("unknown header key `{other}`"))),
                }
                continue;
            }
            if fields.len() != 4 {
                return Err(err(n, format!("expected 4 numbers (x1 y1 x2 y2), found {} fields", fields.len())));
            }
            let mut v = [0.0; 4];
            for (slot, f) in v.iter_mut().zip(&fields) {
                *slot = f
                    .parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| err(n, format!("`{f}` is not a finite number")))?;
            }
            rows.push((n, v));
        }
        let width = width.ok_or_else(|| err(0, "missing `width` header"))?;
        let height = height.ok_or_else(|| err(0, "missing `height` header"))?;
        let (w, h) = (width as f64, height as f64);
        let cap = default_flow_cap(w, h);
        let inside = |x: f64, y: f64| {
            x >= -MARGIN * w && x <= (1.0 + MARGIN) * w && y >= -MARGIN * h && y <= (1.0 + MARGIN) * h
        };
        let mut corrs = Vec::with_capacity(rows.len());
        for (n, [x1, y1, x2, y2]) in rows {
            if !inside(x1, y1) || !inside(x2, y2) {
                return Err(err(n, format!("point outside the {width}×{height} image plus 10% margin")));
            }
            let c = Correspondence::from_points(Pixel::new(x1, y1), Pixel::new(x2, y2));
            c.check(cap).map_err(|e| err(n, e.to_string()))?;
            corrs.push(c);
        }
        Ok(Self {
            width,
            height,
            gamma,
            pair,
            corrs,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> anyhow::Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
        Self::parse(&text).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("width {}\nheight {}\n", self.width, self.height);
        if let Some(g) = self.gamma {
            writeln!(s, "gamma {g}").unwrap();
        }
        if let Some(p) = &self.pair {
            writeln!(s, "pair {p}").unwrap();
        }
        for c in &self.corrs {
            let q = c.p2();
            writeln!(s, "{} {} {} {}", c.p1.x, c.p1.y, q.x, q.y).unwrap();
        }
        s
    }
}
