//! Rectangular windows and the multi-scale candidate grid.

use crate::error::{Error, Result};

/// Axis-aligned rectangle with integer pixel coordinates. Also used for
/// windows expressed in patch-grid units; the surrounding API documents
/// which unit applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Window {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl Window {
    pub fn new(x: usize, y: usize, w: usize, h: usize) -> Self {
        Self { x, y, w, h }
    }

    pub fn area(&self) -> usize {
        self.w * self.h
    }

    /// Pixel count of the intersection with `other`.
    pub fn intersection_area(&self, other: &Window) -> usize {
        let x0 = self.x.max(other.x);
        let y0 = self.y.max(other.y);
        let x1 = (self.x + self.w).min(other.x + other.w);
        let y1 = (self.y + self.h).min(other.y + other.h);
        if x1 > x0 && y1 > y0 {
            (x1 - x0) * (y1 - y0)
        } else {
            0
        }
    }

    pub fn fits_in(&self, width: usize, height: usize) -> bool {
        self.w > 0 && self.h > 0 && self.x + self.w <= width && self.y + self.h <= height
    }
}

/// Scale factors swept by the matcher, plus the spatial stride of the
/// sliding window.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleGrid {
    pub sx_values: Vec<f64>,
    pub sy_values: Vec<f64>,
    /// Sliding-window step in pixels; must stay a multiple of the patch
    /// size so candidate windows land on the precomputed patch grid.
    pub spatial_stride: usize,
    /// Restrict candidates to sx == sy.
    pub tied_axes: bool,
}

impl ScaleGrid {
    pub fn new(sx_values: Vec<f64>, sy_values: Vec<f64>, spatial_stride: usize) -> Result<Self> {
        let grid = Self {
            sx_values,
            sy_values,
            spatial_stride,
            tied_axes: false,
        };
        grid.validate()?;
        Ok(grid)
    }

    /// Uniform range over both axes: `lo..=hi` stepped by `step`.
    pub fn uniform(lo: f64, hi: f64, step: f64, spatial_stride: usize) -> Result<Self> {
        if !(lo > 0.0 && hi >= lo && step > 0.0) {
            return Err(Error::Parameter(format!(
                "invalid scale range {lo}..{hi} step {step}"
            )));
        }
        let mut values = Vec::new();
        let mut i = 0usize;
        loop {
            let v = lo + step * i as f64;
            if v > hi + 1e-9 {
                break;
            }
            values.push(v);
            i += 1;
        }
        Self::new(values.clone(), values, spatial_stride)
    }

    /// Single-scale grid {1.0} used by the fixed-scale measures.
    pub fn fixed(spatial_stride: usize) -> Self {
        Self {
            sx_values: vec![1.0],
            sy_values: vec![1.0],
            spatial_stride,
            tied_axes: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for values in [&self.sx_values, &self.sy_values] {
            if values.is_empty() {
                return Err(Error::Parameter("scale list must be non-empty".into()));
            }
            if values.iter().any(|v| *v <= 0.0 || !v.is_finite()) {
                return Err(Error::Parameter("scale factors must be positive".into()));
            }
            if values.windows(2).any(|w| w[0] >= w[1]) && values.len() > 1 {
                return Err(Error::Parameter(
                    "scale lists must be sorted ascending without duplicates".into(),
                ));
            }
        }
        if self.spatial_stride == 0 {
            return Err(Error::Parameter("spatial stride must be positive".into()));
        }
        Ok(())
    }

    /// The (sx, sy) pairs in scan order.
    pub fn pairs(&self) -> Vec<(f64, f64)> {
        if self.tied_axes {
            // Tied axes only make sense when both lists match; pair by value.
            self.sx_values
                .iter()
                .filter(|sx| self.sy_values.iter().any(|sy| (*sy - **sx).abs() < 1e-12))
                .map(|s| (*s, *s))
                .collect()
        } else {
            let mut out = Vec::with_capacity(self.sx_values.len() * self.sy_values.len());
            for &sx in &self.sx_values {
                for &sy in &self.sy_values {
                    out.push((sx, sy));
                }
            }
            out
        }
    }
}

impl Default for ScaleGrid {
    /// The matcher's default sweep: 0.5 to 2.0 in steps of 0.1 on both
    /// axes, stride of one 2x2 patch.
    fn default() -> Self {
        Self::uniform(0.5, 2.0, 0.1, 2).expect("default grid is valid")
    }
}
