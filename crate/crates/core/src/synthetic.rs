//! Generated test images with known ground truth.

use ndarray::Array2;
use rand::rngs::StdRng;
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};

use crate::error::{invalid, Result};
use crate::image::ImageTensor;

/// An image together with the true region index of every pixel.
#[derive(Debug, Clone)]
pub struct Synthetic {
    pub image: ImageTensor,
    pub truth: Array2<u32>,
}

impl Synthetic {
    pub fn regions(&self) -> usize {
        self.truth
            .iter()
            .copied()
            .max()
            .map_or(0, |m| m as usize + 1)
    }

    /// Pixels that touch a different region through a 4-neighbour.
    pub fn boundary(&self) -> Array2<bool> {
        let (h, w) = self.truth.dim();
        let t = &self.truth;
        Array2::from_shape_fn((h, w), |(r, c)| {
            let v = t[[r, c]];
            (r > 0 && t[[r - 1, c]] != v)
                || (r + 1 < h && t[[r + 1, c]] != v)
                || (c > 0 && t[[r, c - 1]] != v)
                || (c + 1 < w && t[[r, c + 1]] != v)
        })
    }
}

/// Square split into four quadrants with the given gray levels, in the
/// order top-left, top-right, bottom-left, bottom-right.
pub fn four_blocks(size: usize, levels: [f64; 4]) -> Result<Synthetic> {
    let half = size / 2;
    let truth = Array2::from_shape_fn((size, size), |(r, c)| {
        ((r >= half) as u32) * 2 + (c >= half) as u32
    });
    let image = ImageTensor::from_gray(truth.mapv(|k| levels[k as usize]))?;
    Ok(Synthetic { image, truth })
}

/// Gray levels of [`shapes`]: background, circle, heart, arch.
pub const SHAPE_LEVELS: [f64; 4] = [0.25, 0.45, 0.6, 0.8];

fn shape_index(x: f64, y: f64) -> u32 {
    // circle
    if (x - 0.3).powi(2) + (y - 0.32).powi(2) <= 0.16f64.powi(2) {
        return 1;
    }
    // heart: (X^2 + Y^2 - 1)^3 - X^2 Y^3 <= 0 with Y pointing up
    let hx = (x - 0.7) / 0.15;
    let hy = -(y - 0.34) / 0.15;
    if (hx * hx + hy * hy - 1.0).powi(3) - hx * hx * hy.powi(3) <= 0.0 {
        return 2;
    }
    // arch: upper half of an annulus
    let (ax, ay) = (x - 0.5, y - 0.9);
    let rr = (ax * ax + ay * ay).sqrt();
    if ay <= 0.0 && (0.13..=0.3).contains(&rr) {
        return 3;
    }
    0
}

/// Four-phase grayscale scene: background, a circle, a heart and an arch.
pub fn shapes(size: usize) -> Result<Synthetic> {
    shapes_with_levels(size, SHAPE_LEVELS)
}

/// [`shapes`] with custom gray levels for background, circle, heart, arch.
pub fn shapes_with_levels(size: usize, levels: [f64; 4]) -> Result<Synthetic> {
    let truth = Array2::from_shape_fn((size, size), |(r, c)| {
        shape_index(
            (c as f64 + 0.5) / size as f64,
            (r as f64 + 0.5) / size as f64,
        )
    });
    let image = ImageTensor::from_gray(truth.mapv(|k| levels[k as usize]))?;
    Ok(Synthetic { image, truth })
}

/// RGB version of [`shapes`].
pub fn color_shapes(size: usize) -> Result<Synthetic> {
    const COLORS: [[f64; 3]; 4] = [
        [0.9, 0.9, 0.85],
        [0.85, 0.15, 0.1],
        [0.95, 0.8, 0.1],
        [0.1, 0.3, 0.8],
    ];
    let gray = shapes(size)?;
    let truth = gray.truth;
    let image = ImageTensor::from_fn(size, size, 3, |r, c, k| COLORS[truth[[r, c]] as usize][k])?;
    Ok(Synthetic { image, truth })
}

/// Six regions laid out as a 2 x 3 grid of blocks.
pub fn six_blocks(height: usize, width: usize) -> Result<Synthetic> {
    const LEVELS: [f64; 6] = [0.05, 0.25, 0.45, 0.6, 0.78, 0.97];
    let truth = Array2::from_shape_fn((height, width), |(r, c)| {
        let row = (2 * r / height) as u32;
        let col = (3 * c / width) as u32;
        row * 3 + col
    });
    let image = ImageTensor::from_gray(truth.mapv(|k| LEVELS[k as usize]))?;
    Ok(Synthetic { image, truth })
}

/// Adds zero-mean Gaussian noise of the given variance, clipping to `[0, 1]`.
pub fn add_gaussian_noise(image: &ImageTensor, variance: f64, seed: u64) -> Result<ImageTensor> {
    if !(variance.is_finite() && variance >= 0.0) {
        return Err(invalid("variance", format!("must be >= 0, got {variance}")));
    }
    let normal =
        Normal::new(0.0, variance.sqrt()).map_err(|e| invalid("variance", e.to_string()))?;
    let mut rng = StdRng::seed_from_u64(seed);
    let data = image
        .data()
        .mapv(|v| (v + normal.sample(&mut rng)).clamp(0.0, 1.0));
    ImageTensor::new(data)
}
