//! Images as row-major float arrays normalized to [0, 1].

use crate::error::{Error, Result};
use crate::window::Window;

/// A grayscale or RGB image. Pixel values are `f64` in [0, 1] regardless of
/// the source bit depth; channels are interleaved per pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Size("image dimensions must be positive".into()));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::Dimension(format!(
                "unsupported channel count {channels}, expected 1 or 3"
            )));
        }
        if data.len() != width * height * channels {
            return Err(Error::Size(format!(
                "data length {} does not match {}x{}x{}",
                data.len(),
                width,
                height,
                channels
            )));
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite() || **v < 0.0 || **v > 1.0) {
            return Err(Error::Parameter(format!(
                "pixel value {v} outside [0, 1]"
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    /// Uniform image filled with `value`.
    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Result<Self> {
        Self::new(width, height, channels, vec![value; width * height * channels])
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

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        debug_assert!(x < self.width && y < self.height && c < self.channels);
        self.data[(y * self.width + x) * self.channels + c]
    }

    /// Pixel as a channel slice.
    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[f64] {
        let base = (y * self.width + x) * self.channels;
        &self.data[base..base + self.channels]
    }

    pub fn set(&mut self, x: usize, y: usize, c: usize, value: f64) {
        self.data[(y * self.width + x) * self.channels + c] = value.clamp(0.0, 1.0);
    }

    /// Extracts the sub-image covered by `win`.
    pub fn crop(&self, win: &Window) -> Result<Image> {
        if win.w == 0 || win.h == 0 {
            return Err(Error::Size("window extents must be positive".into()));
        }
        if win.x + win.w > self.width || win.y + win.h > self.height {
            return Err(Error::Bounds(format!(
                "window {}+{}x{}+{} exceeds image {}x{}",
                win.x, win.w, win.y, win.h, self.width, self.height
            )));
        }
        let mut data = Vec::with_capacity(win.w * win.h * self.channels);
        for y in win.y..win.y + win.h {
            let row = (y * self.width + win.x) * self.channels;
            data.extend_from_slice(&self.data[row..row + win.w * self.channels]);
        }
        Ok(Image {
            width: win.w,
            height: win.h,
            channels: self.channels,
            data,
        })
    }

    /// Collapses RGB to a single channel as the unweighted channel mean.
    /// Single-channel images are returned unchanged.
    pub fn to_intensity(&self) -> Image {
        if self.channels == 1 {
            return self.clone();
        }
        let mut data = Vec::with_capacity(self.width * self.height);
        for px in self.data.chunks_exact(self.channels) {
            data.push(px.iter().sum::<f64>() / self.channels as f64);
        }
        Image {
            width: self.width,
            height: self.height,
            channels: 1,
            data,
        }
    }

    /// Full-image window.
    pub fn full_window(&self) -> Window {
        Window {
            x: 0,
            y: 0,
            w: self.width,
            h: self.height,
        }
    }

    /// Rotates 90 degrees counter-clockwise.
    pub fn rotate90(&self) -> Image {
        let (w, h) = (self.width, self.height);
        let mut out = Image {
            width: h,
            height: w,
            channels: self.channels,
            data: vec![0.0; self.data.len()],
        };
        for y in 0..h {
            for x in 0..w {
                // (x, y) -> (y, w-1-x)
                for c in 0..self.channels {
                    out.data[((w - 1 - x) * h + y) * self.channels + c] = self.get(x, y, c);
                }
            }
        }
        out
    }
}

/// A single-channel float plane without the [0, 1] restriction of
/// [`Image`]. Holds appearance-rank maps and likelihood maps; cells may
/// be NaN where no value was ever written.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Field {
    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: f64) {
        self.data[y * self.width + x] = value;
    }

    /// Cell-wise maximum with another field of the same dims. NaN means
    /// "unscored" and loses to any number.
    pub fn merge_max(&mut self, other: &Field) {
        assert_eq!(self.width, other.width);
        assert_eq!(self.height, other.height);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            if b.is_nan() {
                continue;
            }
            if a.is_nan() || *b > *a {
                *a = *b;
            }
        }
    }

    /// Bit-level equality; unlike `==` this treats NaN cells as equal to
    /// themselves, which is what determinism checks need.
    pub fn bits_eq(&self, other: &Field) -> bool {
        self.width == other.width
            && self.height == other.height
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }

    /// Quantizes to an 8-bit [`Image`], mapping min..max to 0..1. NaN
    /// cells map to 0.
    pub fn normalized(&self) -> Image {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for v in &self.data {
            if v.is_nan() {
                continue;
            }
            lo = lo.min(*v);
            hi = hi.max(*v);
        }
        let span = if hi > lo { hi - lo } else { 1.0 };
        let data = self
            .data
            .iter()
            .map(|v| if v.is_nan() { 0.0 } else { (v - lo) / span })
            .collect();
        Image::new(self.width, self.height, 1, data).expect("normalized values lie in [0,1]")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(width: usize, height: usize) -> Image {
        let n = width * height;
        let data = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        Image::new(width, height, 1, data).unwrap()
    }

    #[test]
    fn crop_full_window_is_identity() {
        let img = ramp(4, 4);
        let out = img.crop(&img.full_window()).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn crop_top_left_quadrant() {
        let img = ramp(4, 4);
        let out = img.crop(&Window::new(0, 0, 2, 2)).unwrap();
        assert_eq!(out.width(), 2);
        assert_eq!(out.height(), 2);
        assert_eq!(out.get(0, 0, 0), img.get(0, 0, 0));
        assert_eq!(out.get(1, 1, 0), img.get(1, 1, 0));
    }

    #[test]
    fn crop_out_of_bounds_fails() {
        let img = ramp(4, 4);
        assert!(matches!(
            img.crop(&Window::new(3, 3, 2, 2)),
            Err(Error::Bounds(_))
        ));
    }

    #[test]
    fn crop_composes() {
        let img = ramp(8, 8);
        let a = Window::new(1, 2, 5, 5);
        let b = Window::new(2, 1, 3, 3);
        let nested = img.crop(&a).unwrap().crop(&b).unwrap();
        let direct = img
            .crop(&Window::new(a.x + b.x, a.y + b.y, b.w, b.h))
            .unwrap();
        assert_eq!(nested, direct);
    }

    #[test]
    fn intensity_of_gray_is_identity() {
        let img = ramp(3, 3);
        assert_eq!(img.to_intensity(), img);
    }

    #[test]
    fn intensity_averages_channels() {
        let img = Image::new(1, 1, 3, vec![0.0, 0.5, 1.0]).unwrap();
        assert_eq!(img.to_intensity().get(0, 0, 0), 0.5);
        let flat = Image::new(1, 1, 3, vec![0.3, 0.3, 0.3]).unwrap();
        assert!((flat.to_intensity().get(0, 0, 0) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn intensity_idempotent() {
        let img = Image::new(1, 1, 3, vec![0.1, 0.2, 0.9]).unwrap();
        let once = img.to_intensity();
        assert_eq!(once.to_intensity(), once);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(Image::new(1, 1, 1, vec![1.5]).is_err());
        assert!(Image::new(1, 1, 1, vec![f64::NAN]).is_err());
        assert!(Image::new(2, 2, 1, vec![0.0]).is_err());
        assert!(Image::new(1, 1, 2, vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn rotate90_four_times_is_identity() {
        let img = ramp(3, 5);
        let rotated = img.rotate90().rotate90().rotate90().rotate90();
        assert_eq!(rotated, img);
    }

    #[test]
    fn rotate90_moves_corner() {
        // CCW: top-right corner goes to the top-left.
        let mut img = Image::filled(2, 2, 1, 0.0).unwrap();
        img.set(1, 0, 0, 1.0);
        let r = img.rotate90();
        assert_eq!(r.get(0, 0, 0), 1.0);
    }

    #[test]
    fn field_merge_and_normalize() {
        let mut a = Field::filled(2, 1, f64::NAN);
        let mut b = Field::filled(2, 1, f64::NAN);
        a.set(0, 0, 1.0);
        b.set(0, 0, 3.0);
        b.set(1, 0, -1.0);
        a.merge_max(&b);
        assert_eq!(a.get(0, 0), 3.0);
        assert_eq!(a.get(1, 0), -1.0);
        let img = a.normalized();
        assert_eq!(img.get(0, 0, 0), 1.0);
        assert_eq!(img.get(1, 0, 0), 0.0);
    }
}
