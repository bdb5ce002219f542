//! Normalized multi-channel image container.

use ndarray::{s, Array2, Array3, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

/// An `height x width x channels` image with every intensity in `[0, 1]`.
///
/// Grayscale images have one channel, color images three. Rows run along
/// the vertical axis, so `get(row, col, channel)` follows the usual matrix
/// convention.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor {
    data: Array3<f64>,
}

impl ImageTensor {
    /// Wraps an intensity array of shape `(height, width, channels)`.
    pub fn new(data: Array3<f64>) -> Result<Self> {
        let (h, w, c) = data.dim();
        if h == 0 || w == 0 {
            return Err(Error::InvalidImage("image has no pixels".into()));
        }
        if c != 1 && c != 3 {
            return Err(Error::InvalidImage(format!(
                "expected 1 or 3 channels, found {c}"
            )));
        }
        if let Some(v) = data
            .iter()
            .find(|v| !v.is_finite() || **v < 0.0 || **v > 1.0)
        {
            return Err(Error::InvalidImage(format!("intensity {v} outside [0, 1]")));
        }
        Ok(Self { data })
    }

    /// Single-channel image from a `(height, width)` array.
    pub fn from_gray(gray: Array2<f64>) -> Result<Self> {
        let (h, w) = gray.dim();
        let data = gray
            .into_shape_with_order((h, w, 1))
            .expect("contiguous 2D array reshapes to 3D");
        Self::new(data)
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        f: impl Fn(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        Self::new(Array3::from_shape_fn(
            (height, width, channels),
            |(r, c, k)| f(r, c, k),
        ))
    }

    pub fn width(&self) -> usize {
        self.data.dim().1
    }

    pub fn height(&self) -> usize {
        self.data.dim().0
    }

    pub fn channels(&self) -> usize {
        self.data.dim().2
    }

    /// Grid shape `(height, width)`, the shape of every phase field.
    pub fn dim(&self) -> (usize, usize) {
        (self.height(), self.width())
    }

    pub fn pixel_count(&self) -> usize {
        self.height() * self.width()
    }

    pub fn get(&self, row: usize, col: usize, channel: usize) -> f64 {
        self.data[[row, col, channel]]
    }

    /// All channel values of one pixel.
    pub fn pixel(&self, row: usize, col: usize) -> ArrayView1<'_, f64> {
        self.data.slice(s![row, col, ..])
    }

    /// One channel as a `(height, width)` view.
    pub fn channel(&self, channel: usize) -> ArrayView2<'_, f64> {
        self.data.slice(s![.., .., channel])
    }

    pub fn data(&self) -> &Array3<f64> {
        &self.data
    }

    pub fn into_data(self) -> Array3<f64> {
        self.data
    }

    /// Copies the rectangle starting at `(row, col)`.
    pub fn crop(&self, row: usize, col: usize, height: usize, width: usize) -> Result<Self> {
        if row + height > self.height() || col + width > self.width() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: (row + height, col + width),
            });
        }
        Self::new(
            self.data
                .slice(s![row..row + height, col..col + width, ..])
                .to_owned(),
        )
    }

    /// Per-channel minimum and maximum.
    pub fn channel_range(&self, channel: usize) -> (f64, f64) {
        self.channel(channel)
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    /// Per-channel mean.
    pub fn channel_mean(&self, channel: usize) -> f64 {
        self.channel(channel).sum() / self.pixel_count() as f64
    }

    /// Channel-averaged intensity, used for gray previews.
    pub fn luminance(&self) -> Array2<f64> {
        let c = self.channels() as f64;
        Array2::from_shape_fn(self.dim(), |(r, col)| self.pixel(r, col).sum() / c)
    }

    /// Bilinear resampling to a new grid, sampling at pixel centres.
    pub fn resize_bilinear(&self, height: usize, width: usize) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidImage("resize target has no pixels".into()));
        }
        let (sh, sw) = self.dim();
        let map = |dst: usize, dst_len: usize, src_len: usize| -> (usize, usize, f64) {
            let x = ((dst as f64 + 0.5) * src_len as f64 / dst_len as f64 - 0.5)
                .clamp(0.0, (src_len - 1) as f64);
            let i0 = x.floor() as usize;
            let i1 = (i0 + 1).min(src_len - 1);
            (i0, i1, x - i0 as f64)
        };
        let rows: Vec<_> = (0..height).map(|r| map(r, height, sh)).collect();
        let cols: Vec<_> = (0..width).map(|c| map(c, width, sw)).collect();
        let data = Array3::from_shape_fn((height, width, self.channels()), |(r, c, k)| {
            let (r0, r1, fr) = rows[r];
            let (c0, c1, fc) = cols[c];
            let top = self.data[[r0, c0, k]] * (1.0 - fc) + self.data[[r0, c1, k]] * fc;
            let bottom = self.data[[r1, c0, k]] * (1.0 - fc) + self.data[[r1, c1, k]] * fc;
            (top * (1.0 - fr) + bottom * fr).clamp(0.0, 1.0)
        });
        Self::new(data)
    }
}
