//! Runtime property monitors: the bound principle, energy decay and a dense
//! matrix-function check of the spectral multipliers.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use ndarray::ArrayView2;

use crate::error::{Error, Result};
use crate::etd::{SolveReport, MBP_SLACK};
use crate::spectral::{phi_scalar, SpectralPlan};
use crate::Field;

/// Relative slack of the energy-decay check: a step may raise `E_h` by at
/// most `ENERGY_SLACK * (1 + |E_h|)`.
pub const ENERGY_SLACK: f64 = 1e-10;

/// Positions `k` where `energies[k + 1]` exceeds `energies[k]` beyond the slack.
pub fn energy_increases(energies: &[f64]) -> Vec<usize> {
    energies
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[1] > w[0] + ENERGY_SLACK * (1.0 + w[0].abs()))
        .map(|(k, _)| k)
        .collect()
}

/// Largest distance outside `[0, 1]` over a list of `(min, max)` ranges.
pub fn bound_excess<'a>(ranges: impl IntoIterator<Item = &'a (f64, f64)>) -> f64 {
    ranges
        .into_iter()
        .map(|&(lo, hi)| (-lo).max(hi - 1.0).max(0.0))
        .fold(0.0, f64::max)
}

/// Whether every iterate of a solve stayed in `[0, 1]` up to [`MBP_SLACK`].
pub fn within_bounds(report: &SolveReport) -> bool {
    bound_excess(report.ranges.iter().flatten()) <= MBP_SLACK
}

/// Dense `L_h = -2 eps D_h + S I` for a `rows x cols` grid flattened row by row.
pub fn dense_operator(
    rows: usize,
    cols: usize,
    h: f64,
    epsilon: f64,
    stabilizer: f64,
) -> DMatrix<f64> {
    let n = rows * cols;
    let scale = 2.0 * epsilon / (h * h);
    let mut l = DMatrix::<f64>::zeros(n, n);
    for r in 0..rows {
        for c in 0..cols {
            let k = r * cols + c;
            l[(k, k)] += stabilizer;
            let mut link = |other: usize| {
                l[(k, k)] += scale;
                l[(k, other)] -= scale;
            };
            if r > 0 {
                link(k - cols);
            }
            if r + 1 < rows {
                link(k + cols);
            }
            if c > 0 {
                link(k - 1);
            }
            if c + 1 < cols {
                link(k + 1);
            }
        }
    }
    l
}

/// Maximum deviation of `plan.apply_phi(j, v)` from `phi_j(dt L_h) v`
/// evaluated through a dense symmetric eigendecomposition, for j = 0, 1, 2.
pub fn phi_oracle_errors(plan: &SpectralPlan, v: ArrayView2<'_, f64>) -> Result<[f64; 3]> {
    let (rows, cols) = plan.dim();
    if v.dim() != (rows, cols) {
        return Err(Error::DimensionMismatch {
            expected: (rows, cols),
            found: v.dim(),
        });
    }
    let l = dense_operator(rows, cols, plan.h(), plan.epsilon(), plan.stabilizer()) * plan.dt();
    let eig = SymmetricEigen::new(l);
    let x = DVector::from_iterator(rows * cols, v.iter().copied());
    let coeffs = eig.eigenvectors.transpose() * &x;
    let mut errors = [0.0; 3];
    for (j, err) in errors.iter_mut().enumerate() {
        let scaled = DVector::from_iterator(
            coeffs.len(),
            coeffs
                .iter()
                .zip(eig.eigenvalues.iter())
                .map(|(c, &a)| c * phi_scalar(j, a)),
        );
        let dense = &eig.eigenvectors * scaled;
        let fast: Field = plan.apply_phi(j, v)?;
        *err = fast
            .iter()
            .zip(dense.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
    }
    Ok(errors)
}
