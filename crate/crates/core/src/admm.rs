//! Alternating minimization: steady-state phase-field solves with frozen
//! means, then closed-form means with frozen fields, until the fields or
//! the label map stop changing.

use std::fmt::Write as _;

use ndarray::Array2;
use serde::Serialize;

use crate::error::Result;
use crate::etd::{plan_for, solve_to_steady, Scheme, SolveReport};
use crate::iglim::EdgeMask;
use crate::image::ImageTensor;
use crate::model::{discrete_energy, update_means, Code, ModelParams, PhaseStack, RegionMeans};

/// Region code of every pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    labels: Array2<u32>,
    n: usize,
}

impl LabelMap {
    pub fn new(labels: Array2<u32>, n: usize) -> Self {
        debug_assert!(labels.iter().all(|&l| (l as usize) < 1 << n));
        Self { labels, n }
    }

    pub fn dim(&self) -> (usize, usize) {
        self.labels.dim()
    }

    /// Number of phase fields behind the codes.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, row: usize, col: usize) -> Code {
        Code(self.labels[[row, col]])
    }

    pub fn as_array(&self) -> &Array2<u32> {
        &self.labels
    }

    /// Pixel count of every code, indexed by code value.
    pub fn region_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; 1 << self.n];
        for &l in &self.labels {
            sizes[l as usize] += 1;
        }
        sizes
    }

    /// Pixels whose label differs from `other`.
    pub fn changed_pixels(&self, other: &LabelMap) -> usize {
        self.labels
            .iter()
            .zip(other.labels.iter())
            .filter(|(a, b)| a != b)
            .count()
    }
}

/// Code of every pixel; bit `i` is set iff `U_i > 1/2` (so `1/2` maps to 0).
pub fn extract_labels(u: &PhaseStack) -> LabelMap {
    let labels = Array2::from_shape_fn(u.dim(), |px| {
        u.fields()
            .iter()
            .enumerate()
            .fold(0u32, |acc, (i, f)| acc | (((f[px] > 0.5) as u32) << i))
    });
    LabelMap::new(labels, u.n())
}

/// Interface pixels of each phase field: pixels whose thresholded value
/// differs from at least one 4-neighbour. The band is two pixels wide.
pub fn extract_contours(labels: &LabelMap) -> Vec<EdgeMask> {
    let (h, w) = labels.dim();
    (0..labels.n())
        .map(|i| {
            let bit = |r: usize, c: usize| labels.get(r, c).bit(i);
            EdgeMask::from_fn((h, w), |r, c| {
                let b = bit(r, c);
                (r > 0 && bit(r - 1, c) != b)
                    || (r + 1 < h && bit(r + 1, c) != b)
                    || (c > 0 && bit(r, c - 1) != b)
                    || (c + 1 < w && bit(r, c + 1) != b)
            })
        })
        .collect()
}

/// [`extract_contours`] straight from phase fields.
pub fn phase_contours(u: &PhaseStack) -> Vec<EdgeMask> {
    extract_contours(&extract_labels(u))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    /// `max_i ||u^{k+1}_i - u^k_i||_inf <= tol_outer`.
    FieldsConverged,
    /// The label map did not change over one outer iteration.
    LabelsStable,
    MaxOuter,
}

/// Bookkeeping of one outer iteration.
#[derive(Debug, Clone, Serialize)]
pub struct OuterRecord {
    /// 1-based outer iteration.
    pub outer: usize,
    /// `E_h(u^k, C^k)`
    pub energy_before: f64,
    /// `E_h(u^{k+1}, C^k)`
    pub energy_after_u: f64,
    /// `E_h(u^{k+1}, C^{k+1})`
    pub energy_after_c: f64,
    pub inner: SolveReport,
    /// `(min, max)` of each field after the u-stage.
    pub ranges: Vec<(f64, f64)>,
    pub field_change: f64,
    pub label_changes: usize,
    /// Regions whose mean was carried over because they were empty.
    pub empty_regions: Vec<Code>,
}

/// Diagnostics of a full run.
#[derive(Debug, Clone, Serialize)]
pub struct RunTrace {
    pub scheme: Scheme,
    pub stabilizer: f64,
    pub gamma: f64,
    pub records: Vec<OuterRecord>,
    pub stop_reason: StopReason,
    /// Regions that were empty when the initial means were formed.
    pub initial_empty_regions: Vec<Code>,
    /// `(min, max)` of each initial field.
    pub initial_ranges: Vec<(f64, f64)>,
}

impl RunTrace {
    pub fn converged(&self) -> bool {
        self.stop_reason != StopReason::MaxOuter
    }

    pub fn outer_iterations(&self) -> usize {
        self.records.len()
    }

    pub fn total_inner_iterations(&self) -> usize {
        self.records.iter().map(|r| r.inner.iterations).sum()
    }

    pub fn mbp_violations(&self) -> usize {
        self.records.iter().map(|r| r.inner.mbp_violations).sum()
    }

    /// Energy at every checkpoint in order: the start, then after each
    /// u-stage and each C-stage.
    pub fn checkpoint_energies(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(1 + 2 * self.records.len());
        if let Some(first) = self.records.first() {
            out.push(first.energy_before);
        }
        for r in &self.records {
            out.push(r.energy_after_u);
            out.push(r.energy_after_c);
        }
        out
    }

    /// One row per checkpoint:
    /// `outer_iter,stage,E_h,min_i,max_i,inner_iters`, where `min_i` and
    /// `max_i` span all fields.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("outer_iter,stage,E_h,min_i,max_i,inner_iters\n");
        let span = |ranges: &[(f64, f64)]| {
            ranges
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(a, b)| {
                    (lo.min(a), hi.max(b))
                })
        };
        if !self.records.is_empty() {
            let (lo, hi) = span(&self.initial_ranges);
            let _ = writeln!(
                out,
                "0,start,{:.12e},{:.6e},{:.6e},0",
                self.records[0].energy_before, lo, hi
            );
        }
        for r in &self.records {
            let (lo, hi) = span(&r.ranges);
            for (stage, e) in [("u", r.energy_after_u), ("c", r.energy_after_c)] {
                let _ = writeln!(
                    out,
                    "{},{stage},{e:.12e},{lo:.6e},{hi:.6e},{}",
                    r.outer, r.inner.iterations
                );
            }
        }
        out
    }
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub phases: PhaseStack,
    pub means: RegionMeans,
    pub labels: LabelMap,
    pub trace: RunTrace,
}

/// Alternates u-stage solves and C-stage updates starting from `u0`, with
/// the initial means formed from `u0`.
pub fn admm_solve(
    image: &ImageTensor,
    u0: &PhaseStack,
    params: &ModelParams,
    scheme: Scheme,
) -> Result<RunResult> {
    params.validate()?;
    let eff = params.effective(image.channels())?;
    let plan = plan_for(u0.dim(), params, image.channels())?;
    let eps1 = params.eps1();

    let initial = update_means(u0, image, eps1, None)?;
    let mut means = initial.means;
    let mut u = u0.clone();
    let mut labels = extract_labels(&u);
    let mut energy = discrete_energy(&u, &means, image, &eff)?;
    let mut records = Vec::new();
    let mut stop_reason = StopReason::MaxOuter;

    for outer in 1..=params.max_outer {
        let (next, inner) = solve_to_steady(&u, &means, image, &plan, params, scheme)?;
        let energy_after_u = discrete_energy(&next, &means, image, &eff)?;
        let update = update_means(&next, image, eps1, Some(&means))?;
        let energy_after_c = discrete_energy(&next, &update.means, image, &eff)?;
        let next_labels = extract_labels(&next);
        let field_change = next.max_abs_diff(&u);
        let label_changes = next_labels.changed_pixels(&labels);
        records.push(OuterRecord {
            outer,
            energy_before: energy,
            energy_after_u,
            energy_after_c,
            ranges: next.ranges(),
            inner,
            field_change,
            label_changes,
            empty_regions: update.empty,
        });
        u = next;
        means = update.means;
        labels = next_labels;
        energy = energy_after_c;
        if field_change <= params.tol_outer {
            stop_reason = StopReason::FieldsConverged;
            break;
        }
        if label_changes == 0 {
            stop_reason = StopReason::LabelsStable;
            break;
        }
    }

    Ok(RunResult {
        phases: u,
        means,
        labels,
        trace: RunTrace {
            scheme,
            stabilizer: eff.stabilizer,
            gamma: params.gamma(image.channels())?,
            records,
            stop_reason,
            initial_empty_regions: initial.empty,
            initial_ranges: u0.ranges(),
        },
    })
}
