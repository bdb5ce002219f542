//! Multi-phase initialization from an inhomogeneous graph Laplacian.
//!
//! 1. Evaluate the weighted 8-neighbour Laplacian of the image.
//! 2. Keep pixels with `|L| > sigma` as rough edges.
//! 3. Split the edge pixels into `m` groups by K-means on their intensity.
//! 4. Drop pixels that are not diagonally connected within their group,
//!    repeated `M` times.
//!
//! [`combine_phases`] then folds the `m` contour masks into
//! `n = ceil(log2 m)` binary phase fields.

use ndarray::Array2;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::image::ImageTensor;
use crate::model::{Code, PhaseStack};
use crate::Field;

/// Neighbour offsets `(drow, dcol)` in the order `l = 1..8`: up-left, up,
/// up-right, right, down-right, down, down-left, left.
pub const NEIGHBOURS: [(isize, isize); 8] = [
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
    (1, 0),
    (1, -1),
    (0, -1),
];

/// Boolean pixel mask on the image grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeMask {
    data: Array2<bool>,
}

impl EdgeMask {
    pub fn empty(dim: (usize, usize)) -> Self {
        Self {
            data: Array2::from_elem(dim, false),
        }
    }

    pub fn from_array(data: Array2<bool>) -> Self {
        Self { data }
    }

    pub fn from_fn(dim: (usize, usize), f: impl Fn(usize, usize) -> bool) -> Self {
        Self {
            data: Array2::from_shape_fn(dim, |(r, c)| f(r, c)),
        }
    }

    pub fn dim(&self) -> (usize, usize) {
        self.data.dim()
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.data[[row, col]]
    }

    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.data[[row, col]] = value;
    }

    /// Number of marked pixels; for one-pixel-wide contours this is the
    /// discrete perimeter.
    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    pub fn pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.data
            .indexed_iter()
            .filter(|(_, &b)| b)
            .map(|((r, c), _)| (r, c))
    }

    pub fn is_subset_of(&self, other: &EdgeMask) -> bool {
        self.data
            .iter()
            .zip(other.data.iter())
            .all(|(&a, &b)| !a || b)
    }

    pub fn as_array(&self) -> &Array2<bool> {
        &self.data
    }

    /// 0/1 indicator field.
    pub fn to_field(&self) -> Field {
        self.data.mapv(|b| if b { 1.0 } else { 0.0 })
    }
}

/// Knobs of the initialization pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitParams {
    /// Weight sharpness `kappa >= 0`.
    pub kappa: f64,
    /// Edge threshold on `|L|`.
    pub sigma: f64,
    /// Denoising sweeps `M`.
    pub denoise_sweeps: usize,
    /// Number of phases `m >= 2`.
    pub phases: usize,
    /// Seed of the K-means initialization.
    pub seed: u64,
}

impl Default for InitParams {
    fn default() -> Self {
        Self {
            kappa: 50.0,
            sigma: 0.05,
            denoise_sweeps: 5,
            phases: 4,
            seed: 0,
        }
    }
}

impl InitParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa.is_finite() && self.kappa >= 0.0) {
            return Err(invalid(
                "kappa",
                format!("must be >= 0, got {}", self.kappa),
            ));
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(invalid(
                "sigma",
                format!("must be >= 0, got {}", self.sigma),
            ));
        }
        if self.phases < 2 {
            return Err(invalid(
                "m",
                format!("need at least 2 phases, got {}", self.phases),
            ));
        }
        if self.phases > 1 << 16 {
            return Err(invalid("m", format!("{} phases is too many", self.phases)));
        }
        Ok(())
    }

    /// Number of phase fields, `ceil(log2 m)`.
    pub fn phase_fields(&self) -> usize {
        phase_field_count(self.phases)
    }
}

/// `ceil(log2 m)`.
pub fn phase_field_count(m: usize) -> usize {
    m.next_power_of_two().trailing_zeros() as usize
}

fn clamped(image: &ImageTensor, row: usize, col: usize, d: (isize, isize)) -> (usize, usize) {
    let r = (row as isize + d.0).clamp(0, image.height() as isize - 1) as usize;
    let c = (col as isize + d.1).clamp(0, image.width() as isize - 1) as usize;
    (r, c)
}

/// Normalized weights `c_1..c_8` of the neighbours of `(row, col)`.
///
/// `c_l` is proportional to `sum_r exp(kappa (I_r - I_r^l)^2)`, so larger
/// intensity jumps get larger weights. Out-of-grid neighbours replicate the
/// nearest border pixel.
pub fn neighbor_weights(image: &ImageTensor, row: usize, col: usize, kappa: f64) -> [f64; 8] {
    let centre = image.pixel(row, col);
    let mut exps = [[0.0; 3]; 8];
    let mut peak = f64::NEG_INFINITY;
    for (l, &d) in NEIGHBOURS.iter().enumerate() {
        let (r, c) = clamped(image, row, col, d);
        for (k, (a, b)) in centre.iter().zip(image.pixel(r, c).iter()).enumerate() {
            let e = kappa * (a - b) * (a - b);
            exps[l][k] = e;
            peak = peak.max(e);
        }
    }
    let channels = image.channels();
    let mut w = [0.0; 8];
    for l in 0..8 {
        w[l] = exps[l][..channels].iter().map(|e| (e - peak).exp()).sum();
    }
    let total: f64 = w.iter().sum();
    for v in &mut w {
        *v /= total;
    }
    w
}

/// Weighted-difference graph Laplacian `L = sum_l sum_r c_l (I_r^l - I_r)`.
pub fn graph_laplacian(image: &ImageTensor, kappa: f64) -> Field {
    Array2::from_shape_fn(image.dim(), |(row, col)| {
        let w = neighbor_weights(image, row, col, kappa);
        let centre = image.pixel(row, col);
        NEIGHBOURS
            .iter()
            .zip(w)
            .map(|(&d, wl)| {
                let (r, c) = clamped(image, row, col, d);
                let diff: f64 = image
                    .pixel(r, c)
                    .iter()
                    .zip(centre.iter())
                    .map(|(n, i)| n - i)
                    .sum();
                wl * diff
            })
            .sum()
    })
}

/// Pixels with `|L| > sigma`.
pub fn threshold_edges(laplacian: &Field, sigma: f64) -> EdgeMask {
    EdgeMask::from_array(laplacian.mapv(|v| v.abs() > sigma))
}

/// Output of [`kmeans_phases`].
#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    /// Cluster of every input point.
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// Sum of squared distances to the assigned centroids.
    pub objective: f64,
    pub iterations: usize,
}

impl Clustering {
    /// Point indices of each cluster.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.centroids.len()];
        for (i, &a) in self.assignments.iter().enumerate() {
            out[a].push(i);
        }
        out
    }
}

pub const KMEANS_MAX_ITER: usize = 100;
pub const KMEANS_TOL: f64 = 1e-6;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    centroids
        .iter()
        .enumerate()
        .map(|(k, c)| (k, sq_dist(point, c)))
        .fold(
            (0, f64::INFINITY),
            |best, cur| if cur.1 < best.1 { cur } else { best },
        )
}

/// Lloyd's K-means with seeded farthest-point initialization.
///
/// Ties go to the lowest cluster index. A cluster that empties is reseeded
/// at the point farthest from its centroid; if every point sits on its
/// centroid the cluster stays empty.
pub fn kmeans_phases(points: &[Vec<f64>], clusters: usize, seed: u64) -> Result<Clustering> {
    if clusters == 0 {
        return Err(invalid("m", "need at least one cluster"));
    }
    if points.len() < clusters {
        return Err(Error::TooFewPoints {
            points: points.len(),
            clusters,
        });
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(invalid("points", "all points need the same dimension"));
    }

    let mut rng = StdRng::seed_from_u64(seed);
    let first = rng.random_range(0..points.len());
    let mut centroids = vec![points[first].clone()];
    let mut min_d: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < clusters {
        let far = min_d
            .iter()
            .enumerate()
            .fold(0, |best, (i, &d)| if d > min_d[best] { i } else { best });
        centroids.push(points[far].clone());
        for (d, p) in min_d.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &points[far]));
        }
    }

    let mut assignments = vec![0; points.len()];
    let mut iterations = 0;
    for iter in 1..=KMEANS_MAX_ITER {
        iterations = iter;
        let mut dist = vec![0.0; points.len()];
        for (i, p) in points.iter().enumerate() {
            let (k, d) = nearest(p, &centroids);
            assignments[i] = k;
            dist[i] = d;
        }
        let mut sums = vec![vec![0.0; dim]; clusters];
        let mut counts = vec![0usize; clusters];
        for (p, &k) in points.iter().zip(&assignments) {
            counts[k] += 1;
            for (s, v) in sums[k].iter_mut().zip(p) {
                *s += v;
            }
        }
        let mut next: Vec<Vec<f64>> = sums
            .into_iter()
            .zip(&counts)
            .zip(&centroids)
            .map(|((s, &n), old)| {
                if n == 0 {
                    old.clone()
                } else {
                    s.into_iter().map(|v| v / n as f64).collect()
                }
            })
            .collect();
        for k in (0..clusters).filter(|&k| counts[k] == 0) {
            let far =
                dist.iter()
                    .enumerate()
                    .fold(None, |best: Option<usize>, (i, &d)| match best {
                        Some(b) if dist[b] >= d => Some(b),
                        _ if d > 0.0 => Some(i),
                        _ => best,
                    });
            if let Some(i) = far {
                next[k] = points[i].clone();
                dist[i] = 0.0;
            }
        }
        let shift = next
            .iter()
            .zip(&centroids)
            .map(|(a, b)| sq_dist(a, b).sqrt())
            .fold(0.0, f64::max);
        centroids = next;
        if shift <= KMEANS_TOL {
            break;
        }
    }
    let mut objective = 0.0;
    for (i, p) in points.iter().enumerate() {
        let (k, d) = nearest(p, &centroids);
        assignments[i] = k;
        objective += d;
    }
    Ok(Clustering {
        assignments,
        centroids,
        objective,
        iterations,
    })
}

fn any_marked(mask: &EdgeMask, row: usize, col: usize, offsets: &[(isize, isize); 3]) -> bool {
    let (h, w) = mask.dim();
    offsets.iter().any(|&(dr, dc)| {
        let r = row as isize + dr;
        let c = col as isize + dc;
        r >= 0 && c >= 0 && (r as usize) < h && (c as usize) < w && mask.get(r as usize, c as usize)
    })
}

const CORNER_SETS: [[(isize, isize); 3]; 4] = [
    [(-1, -1), (0, -1), (-1, 0)],
    [(-1, 1), (0, 1), (-1, 0)],
    [(1, -1), (0, -1), (1, 0)],
    [(1, 1), (0, 1), (1, 0)],
];

/// Whether `(row, col)` is diagonally connected inside `mask`.
pub fn is_diagonally_connected(mask: &EdgeMask, row: usize, col: usize) -> bool {
    let hit = CORNER_SETS.map(|set| any_marked(mask, row, col, &set));
    (hit[0] && hit[3]) || (hit[1] && hit[2])
}

/// `sweeps` rounds of removing pixels that are not diagonally connected.
/// Each round judges every pixel against the mask from the previous round.
pub fn diagonal_denoise(mask: &EdgeMask, sweeps: usize) -> EdgeMask {
    let mut current = mask.clone();
    for _ in 0..sweeps {
        let next = EdgeMask::from_fn(current.dim(), |r, c| {
            current.get(r, c) && is_diagonally_connected(&current, r, c)
        });
        if next == current {
            break;
        }
        current = next;
    }
    current
}

/// Edge pixels split into `m` denoised phase masks.
pub fn multi_iglim(image: &ImageTensor, params: &InitParams) -> Result<Vec<EdgeMask>> {
    params.validate()?;
    let lap = graph_laplacian(image, params.kappa);
    let edges = threshold_edges(&lap, params.sigma);
    let positions: Vec<(usize, usize)> = edges.pixels().collect();
    if positions.is_empty() {
        return Err(Error::NoEdges {
            sigma: params.sigma,
        });
    }
    let values: Vec<Vec<f64>> = positions
        .iter()
        .map(|&(r, c)| image.pixel(r, c).to_vec())
        .collect();
    let clustering = kmeans_phases(&values, params.phases, params.seed)?;
    let mut masks = vec![EdgeMask::empty(image.dim()); params.phases];
    for (&(r, c), &k) in positions.iter().zip(&clustering.assignments) {
        masks[k].set(r, c, true);
    }
    Ok(masks
        .iter()
        .map(|m| diagonal_denoise(m, params.denoise_sweeps))
        .collect())
}

/// Code given to the mask at each position of the ascending-perimeter
/// order: the smallest mask gets all zeros, the rest take the non-zero
/// codes in descending binary order with `U_1` as the most significant bit.
///
/// For `m = 4` this yields `(1,1)`, `(1,0)`, `(0,1)` for the second to
/// fourth masks, so `U_1 = v_2 + v_3` and `U_2 = v_2 + v_4`.
pub fn code_sequence(m: usize) -> Vec<Code> {
    let n = phase_field_count(m);
    let top = 1u32 << n;
    std::iter::once(Code(0))
        .chain((1..top).rev().map(|t| {
            Code::from_bits(
                &(0..n)
                    .map(|k| (t >> (n - 1 - k)) & 1 == 1)
                    .collect::<Vec<_>>(),
            )
        }))
        .take(m)
        .collect()
}

/// Code of every input mask, in input order. Masks are ranked by pixel
/// count with ties kept in input order.
pub fn phase_codes(masks: &[EdgeMask]) -> Result<Vec<Code>> {
    if masks.len() < 2 {
        return Err(invalid(
            "m",
            format!("need at least 2 masks, got {}", masks.len()),
        ));
    }
    let mut order: Vec<usize> = (0..masks.len()).collect();
    order.sort_by_key(|&i| masks[i].count());
    let seq = code_sequence(masks.len());
    let mut codes = vec![Code(0); masks.len()];
    for (rank, &i) in order.iter().enumerate() {
        codes[i] = seq[rank];
    }
    Ok(codes)
}

/// Initial phase fields `U_i = min(1, sum of masks whose code has bit i)`.
pub fn combine_phases(masks: &[EdgeMask]) -> Result<PhaseStack> {
    let codes = phase_codes(masks)?;
    let dim = masks[0].dim();
    if let Some(m) = masks.iter().find(|m| m.dim() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: m.dim(),
        });
    }
    let n = phase_field_count(masks.len());
    let fields = (0..n)
        .map(|i| {
            let mut f = Field::zeros(dim);
            for (mask, code) in masks.iter().zip(&codes) {
                if code.bit(i) {
                    f.zip_mut_with(mask.as_array(), |v, &b| {
                        if b {
                            *v = (*v + 1.0).min(1.0);
                        }
                    });
                }
            }
            f
        })
        .collect();
    PhaseStack::new(fields)
}
