//! Neumann Laplacian, orthonormal 2D cosine transform and phi-functions of
//! the stabilized linear operator `L_h = -2 eps D_h + S I`.
//!
//! Under homogeneous Neumann conditions the cosine modes
//! `cos(pi k (i + 1/2) / M)` diagonalize the 1D stencil `Lambda_M`, with
//! eigenvalue `-4 sin^2(k pi / (2 M))`. Any matrix function of `L_h` is
//! therefore a pointwise multiplier in DCT-II space.

use std::sync::Arc;

use ndarray::{Array2, ArrayView2, Zip};
use rustdct::{DctPlanner, TransformType2And3};

use crate::error::{invalid, Error, Result};
use crate::Field;

/// Below this argument `phi_1` and `phi_2` switch to their Taylor series.
pub const PHI_SERIES_THRESHOLD: f64 = 1e-4;

/// `D_h v`: five-point Neumann Laplacian with one-sided end rows.
pub fn laplacian_apply(v: ArrayView2<'_, f64>, h: f64) -> Field {
    let (rows, cols) = v.dim();
    let inv_h2 = 1.0 / (h * h);
    Array2::from_shape_fn((rows, cols), |(r, c)| {
        let center = v[[r, c]];
        let mut acc = 0.0;
        if r > 0 {
            acc += v[[r - 1, c]] - center;
        }
        if r + 1 < rows {
            acc += v[[r + 1, c]] - center;
        }
        if c > 0 {
            acc += v[[r, c - 1]] - center;
        }
        if c + 1 < cols {
            acc += v[[r, c + 1]] - center;
        }
        acc * inv_h2
    })
}

/// Eigenvalues of the 1D Neumann stencil `Lambda_M`, ascending in `k`.
pub fn neumann_eigenvalues(m: usize) -> Vec<f64> {
    (0..m)
        .map(|k| {
            let s = (k as f64 * std::f64::consts::PI / (2.0 * m as f64)).sin();
            -4.0 * s * s
        })
        .collect()
}

/// `phi_j(a)` for `j` in `{0, 1, 2}` and `a >= 0`.
///
/// `phi_0 = e^{-a}`, `phi_1 = (1 - e^{-a}) / a`, `phi_2 = (e^{-a} - 1 + a) / a^2`,
/// with limits `1, 1, 1/2` at zero.
pub fn phi_scalar(j: usize, a: f64) -> f64 {
    match j {
        0 => (-a).exp(),
        1 => {
            if a < PHI_SERIES_THRESHOLD {
                1.0 - a / 2.0 + a * a / 6.0 - a.powi(3) / 24.0 + a.powi(4) / 120.0
            } else {
                -(-a).exp_m1() / a
            }
        }
        2 => {
            if a < PHI_SERIES_THRESHOLD {
                0.5 - a / 6.0 + a * a / 24.0 - a.powi(3) / 120.0 + a.powi(4) / 720.0
            } else {
                ((-a).exp_m1() + a) / (a * a)
            }
        }
        _ => panic!("phi_{j} is not defined; only phi_0, phi_1 and phi_2 are"),
    }
}

/// Orthonormal separable DCT-II / DCT-III pair on a fixed grid.
#[derive(Clone)]
pub struct Dct2d {
    rows: usize,
    cols: usize,
    row_dct: Arc<dyn TransformType2And3<f64>>,
    col_dct: Arc<dyn TransformType2And3<f64>>,
}

impl std::fmt::Debug for Dct2d {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Dct2d")
            .field("rows", &self.rows)
            .field("cols", &self.cols)
            .finish()
    }
}

impl Dct2d {
    pub fn new(rows: usize, cols: usize) -> Self {
        let mut planner = DctPlanner::new();
        Self {
            rows,
            cols,
            row_dct: planner.plan_dct2(cols),
            col_dct: planner.plan_dct2(rows),
        }
    }

    pub fn dim(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    fn check(&self, v: &ArrayView2<'_, f64>) -> Result<()> {
        if v.dim() != (self.rows, self.cols) {
            return Err(Error::DimensionMismatch {
                expected: (self.rows, self.cols),
                found: v.dim(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, v: ArrayView2<'_, f64>) -> Result<Field> {
        self.check(&v)?;
        let mut out = v.to_owned();
        self.forward_in_place(&mut out);
        Ok(out)
    }

    pub fn inverse(&self, coeffs: ArrayView2<'_, f64>) -> Result<Field> {
        self.check(&coeffs)?;
        let mut out = coeffs.to_owned();
        self.inverse_in_place(&mut out);
        Ok(out)
    }

    pub(crate) fn forward_in_place(&self, data: &mut Field) {
        self.pass(data, true);
    }

    pub(crate) fn inverse_in_place(&self, data: &mut Field) {
        self.pass(data, false);
    }

    fn pass(&self, data: &mut Field, forward: bool) {
        let mut scratch = vec![
            0.0;
            self.row_dct
                .get_scratch_len()
                .max(self.col_dct.get_scratch_len())
        ];
        transform_rows(&*self.row_dct, data, &mut scratch, forward);
        // columns become contiguous rows after a transpose
        let mut t = data.t().as_standard_layout().into_owned();
        transform_rows(&*self.col_dct, &mut t, &mut scratch, forward);
        data.assign(&t.t());
    }
}

fn transform_rows(
    dct: &dyn TransformType2And3<f64>,
    data: &mut Field,
    scratch: &mut [f64],
    forward: bool,
) {
    let mut buf = Vec::new();
    for mut row in data.rows_mut() {
        match row.as_slice_mut() {
            Some(line) => transform_line(dct, line, scratch, forward),
            None => {
                buf.clear();
                buf.extend(row.iter().copied());
                transform_line(dct, &mut buf, scratch, forward);
                row.assign(&ndarray::ArrayView1::from(&buf[..]));
            }
        }
    }
}

/// Orthonormal 1D DCT-II (forward) or DCT-III (inverse) of one line.
fn transform_line(
    dct: &dyn TransformType2And3<f64>,
    line: &mut [f64],
    scratch: &mut [f64],
    forward: bool,
) {
    let n = line.len() as f64;
    let s0 = (1.0 / n).sqrt();
    let sk = (2.0 / n).sqrt();
    if forward {
        dct.process_dct2_with_scratch(line, scratch);
        line[0] *= s0;
        for x in &mut line[1..] {
            *x *= sk;
        }
    } else {
        line[0] *= 2.0 * s0;
        for x in &mut line[1..] {
            *x *= sk;
        }
        dct.process_dct3_with_scratch(line, scratch);
    }
}

/// Orthonormal 2D DCT-II of a field.
pub fn dct2_forward(v: ArrayView2<'_, f64>) -> Field {
    let (r, c) = v.dim();
    Dct2d::new(r, c)
        .forward(v)
        .expect("plan built for this shape")
}

/// Inverse of [`dct2_forward`].
pub fn dct2_inverse(coeffs: ArrayView2<'_, f64>) -> Field {
    let (r, c) = coeffs.dim();
    Dct2d::new(r, c)
        .inverse(coeffs)
        .expect("plan built for this shape")
}

/// Precomputed spectrum of `dt * L_h` and its phi-multipliers on one grid.
///
/// Immutable after construction; share it freely between threads.
#[derive(Debug, Clone)]
pub struct SpectralPlan {
    dct: Dct2d,
    h: f64,
    epsilon: f64,
    stabilizer: f64,
    dt: f64,
    eigen: Field,
    multipliers: [Field; 3],
}

impl SpectralPlan {
    /// Plans `phi_j(dt L_h)` with `L_h = -2 epsilon D_h + stabilizer I`
    /// on a `rows x cols` grid of spacing `h`.
    pub fn new(
        rows: usize,
        cols: usize,
        h: f64,
        epsilon: f64,
        stabilizer: f64,
        dt: f64,
    ) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(invalid("grid", "grid must be non-empty"));
        }
        for (name, v) in [
            ("h", h),
            ("epsilon", epsilon),
            ("S", stabilizer),
            ("dt", dt),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(
                    name,
                    format!("must be positive and finite, got {v}"),
                ));
            }
        }
        let row_eig = neumann_eigenvalues(rows);
        let col_eig = neumann_eigenvalues(cols);
        let scale = 2.0 * epsilon / (h * h);
        let eigen = Array2::from_shape_fn((rows, cols), |(k1, k2)| {
            dt * (-scale * (row_eig[k1] + col_eig[k2]) + stabilizer)
        });
        let multipliers = [0, 1, 2].map(|j| eigen.mapv(|a| phi_scalar(j, a)));
        Ok(Self {
            dct: Dct2d::new(rows, cols),
            h,
            epsilon,
            stabilizer,
            dt,
            eigen,
            multipliers,
        })
    }

    pub fn dim(&self) -> (usize, usize) {
        self.dct.dim()
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn stabilizer(&self) -> f64 {
        self.stabilizer
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn dct(&self) -> &Dct2d {
        &self.dct
    }

    /// Eigenvalues of `dt L_h` indexed by cosine mode `(k1, k2)`.
    pub fn eigenvalues(&self) -> &Field {
        &self.eigen
    }

    /// `phi_j` evaluated on [`Self::eigenvalues`].
    pub fn multiplier(&self, j: usize) -> &Field {
        &self.multipliers[j]
    }

    fn check(&self, v: &ArrayView2<'_, f64>) -> Result<()> {
        if v.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: v.dim(),
            });
        }
        Ok(())
    }

    /// `phi_j(dt L_h) v`.
    pub fn apply_phi(&self, j: usize, v: ArrayView2<'_, f64>) -> Result<Field> {
        assert!(j <= 2, "phi_{j} is not defined");
        self.check(&v)?;
        let mut out = v.to_owned();
        self.dct.forward_in_place(&mut out);
        out *= &self.multipliers[j];
        self.dct.inverse_in_place(&mut out);
        Ok(out)
    }

    /// `sum_k coef_k phi_{j_k}(dt L_h) v_k` with one inverse transform.
    pub fn apply_phi_sum(&self, terms: &[(usize, f64, ArrayView2<'_, f64>)]) -> Result<Field> {
        let mut acc = Array2::zeros(self.dim());
        for (j, coef, v) in terms {
            assert!(*j <= 2, "phi_{j} is not defined");
            self.check(v)?;
            let mut hat = v.to_owned();
            self.dct.forward_in_place(&mut hat);
            Zip::from(&mut acc)
                .and(&hat)
                .and(&self.multipliers[*j])
                .for_each(|a, &x, &m| *a += coef * m * x);
        }
        self.dct.inverse_in_place(&mut acc);
        Ok(acc)
    }
}

/// Free-function form of [`SpectralPlan::apply_phi`].
pub fn apply_phi(j: usize, plan: &SpectralPlan, v: ArrayView2<'_, f64>) -> Result<Field> {
    plan.apply_phi(j, v)
}
