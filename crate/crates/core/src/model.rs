//! Model mathematics of the multi-phase Allen-Cahn Chan-Vese energy.
//!
//! `n` phase fields `U_1..U_n` with values in `[0, 1]` encode `2^n`
//! regions. A region is identified by a binary [`Code`] whose bit `i` is
//! set when `U_{i+1} > 1/2`. The energy summed over pixels is
//!
//! ```text
//! E_h = sum_px [ sum_i W(U_i) / eps + F(U, I, C) ] - sum_i eps U_i^T D_h U_i
//! F   = lambda sum_r sum_b (I_r - C_b,r)^2 Q_b(U)
//! Q_b = prod_j ( b_j ? H(U_j - 1/2) : 1 - H(U_j - 1/2) )
//! ```
//!
//! with the regularized Heaviside `H` of half-width `eps1 = 1 / (2p)`.
//! For two fields the codes map onto the four classic means as
//! `C11 = (1,1)`, `C12 = (1,0)`, `C21 = (0,1)`, `C22 = (0,0)`.

use std::f64::consts::PI;

use ndarray::{s, Array2, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::image::ImageTensor;
use crate::Field;

/// Double-well potential `W(u) = u^2 (u - 1)^2`.
pub fn double_well(u: f64) -> f64 {
    let v = u * (u - 1.0);
    v * v
}

/// `w(u) = W'(u) = 2u (2u - 1)(u - 1)`.
pub fn double_well_deriv(u: f64) -> f64 {
    2.0 * u * (2.0 * u - 1.0) * (u - 1.0)
}

/// Regularized Heaviside step of half-width `eps1`.
pub fn heaviside_reg(u: f64, eps1: f64) -> f64 {
    if u > eps1 {
        1.0
    } else if u < -eps1 {
        0.0
    } else {
        (u + eps1 / PI * (PI * u / eps1).sin()) / (2.0 * eps1) + 0.5
    }
}

/// Regularized Dirac delta, the derivative of [`heaviside_reg`].
pub fn dirac_reg(u: f64, eps1: f64) -> f64 {
    if u.abs() > eps1 {
        0.0
    } else {
        (1.0 + (PI * u / eps1).cos()) / (2.0 * eps1)
    }
}

/// Derivative of [`dirac_reg`].
pub fn dirac_reg_deriv(u: f64, eps1: f64) -> f64 {
    if u.abs() > eps1 {
        0.0
    } else {
        -PI / (2.0 * eps1 * eps1) * (PI * u / eps1).sin()
    }
}

/// Lower bound on the stabilizer that keeps both ETD schemes inside `[0, 1]`:
/// `gamma = 2/eps + 2 omega lambda pi / eps1^2`.
pub fn stabilizer_bound(epsilon: f64, lambda: f64, channels: usize, eps1: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(invalid(
            "epsilon",
            format!("must be positive, got {epsilon}"),
        ));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(invalid(
            "lambda",
            format!("must be non-negative, got {lambda}"),
        ));
    }
    if channels == 0 {
        return Err(invalid("channels", "must be positive"));
    }
    if !(eps1 > 0.0 && eps1.is_finite()) {
        return Err(invalid("eps1", format!("must be positive, got {eps1}")));
    }
    Ok(2.0 / epsilon + 2.0 * channels as f64 * lambda * PI / (eps1 * eps1))
}

/// How the stabilizer is chosen for a solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum MbpMode {
    /// Raise `S` to at least `gamma`, which guarantees the bound principle.
    EnforceGamma,
    /// Use `S` as given; bound violations are only monitored.
    #[default]
    UserS,
}

/// Scalar knobs of the model and of the solvers built on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Interface width.
    pub epsilon: f64,
    /// Fitting weight.
    pub lambda: f64,
    /// Odd integer `p >= 3`; the Heaviside half-width is `1 / (2p)`.
    pub p: u32,
    /// Spatial step.
    pub h: f64,
    /// Stabilizer `S`.
    pub stabilizer: f64,
    /// Time step.
    pub dt: f64,
    pub tol_steady: f64,
    pub tol_outer: f64,
    pub max_inner: usize,
    pub max_outer: usize,
    pub mbp_mode: MbpMode,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            epsilon: 6.0,
            lambda: 40.0,
            p: 3,
            h: 0.3,
            stabilizer: 120.0,
            dt: 0.3,
            tol_steady: 1e-4,
            tol_outer: 1e-3,
            max_inner: 500,
            max_outer: 50,
            mbp_mode: MbpMode::UserS,
        }
    }
}

impl ModelParams {
    pub fn eps1(&self) -> f64 {
        1.0 / (2.0 * self.p as f64)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("epsilon", self.epsilon),
            ("h", self.h),
            ("S", self.stabilizer),
            ("dt", self.dt),
            ("tol_steady", self.tol_steady),
            ("tol_outer", self.tol_outer),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(
                    name,
                    format!("must be positive and finite, got {v}"),
                ));
            }
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(invalid(
                "lambda",
                format!("must be non-negative, got {}", self.lambda),
            ));
        }
        if self.p < 3 || self.p.is_multiple_of(2) {
            return Err(invalid(
                "p",
                format!("must be an odd integer >= 3, got {}", self.p),
            ));
        }
        if self.max_inner == 0 || self.max_outer == 0 {
            return Err(invalid(
                "max_inner/max_outer",
                "iteration caps must be positive",
            ));
        }
        Ok(())
    }

    pub fn gamma(&self, channels: usize) -> Result<f64> {
        stabilizer_bound(self.epsilon, self.lambda, channels, self.eps1())
    }

    /// Copy with the stabilizer actually used by the solver for `channels`.
    pub fn effective(&self, channels: usize) -> Result<Self> {
        let mut out = self.clone();
        if self.mbp_mode == MbpMode::EnforceGamma {
            out.stabilizer = self.stabilizer.max(self.gamma(channels)?);
        }
        Ok(out)
    }
}

/// Binary region code; bit `i` corresponds to phase field `i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Code(pub u32);

impl Code {
    pub fn from_bits(bits: &[bool]) -> Self {
        Code(
            bits.iter()
                .enumerate()
                .fold(0, |acc, (i, &b)| acc | ((b as u32) << i)),
        )
    }

    pub fn bit(self, i: usize) -> bool {
        (self.0 >> i) & 1 == 1
    }

    pub fn flip(self, i: usize) -> Code {
        Code(self.0 ^ (1 << i))
    }

    pub fn bits(self, n: usize) -> Vec<bool> {
        (0..n).map(|i| self.bit(i)).collect()
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    /// Every code of length `n`, in increasing numeric order.
    pub fn all(n: usize) -> impl Iterator<Item = Code> {
        (0..1u32 << n).map(Code)
    }
}

/// `n` phase fields on a common grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseStack {
    fields: Vec<Field>,
}

impl PhaseStack {
    pub fn new(fields: Vec<Field>) -> Result<Self> {
        let first = fields
            .first()
            .ok_or_else(|| invalid("n", "at least one phase field is required"))?;
        let dim = first.dim();
        if dim.0 == 0 || dim.1 == 0 {
            return Err(invalid("grid", "phase fields must be non-empty"));
        }
        if fields.len() > 16 {
            return Err(invalid(
                "n",
                format!("{} phase fields is too many", fields.len()),
            ));
        }
        for f in &fields {
            if f.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: f.dim(),
                });
            }
        }
        Ok(Self { fields })
    }

    pub fn constant(n: usize, dim: (usize, usize), value: f64) -> Result<Self> {
        Self::new(vec![Array2::from_elem(dim, value); n])
    }

    /// Number of phase fields.
    pub fn n(&self) -> usize {
        self.fields.len()
    }

    /// Number of encodable regions, `2^n`.
    pub fn region_count(&self) -> usize {
        1 << self.n()
    }

    pub fn dim(&self) -> (usize, usize) {
        self.fields[0].dim()
    }

    pub fn field(&self, i: usize) -> &Field {
        &self.fields[i]
    }

    pub fn fields(&self) -> &[Field] {
        &self.fields
    }

    pub fn fields_mut(&mut self) -> &mut [Field] {
        &mut self.fields
    }

    pub fn into_fields(self) -> Vec<Field> {
        self.fields
    }

    /// Values of every field at one pixel.
    pub fn at(&self, row: usize, col: usize) -> Vec<f64> {
        self.fields.iter().map(|f| f[[row, col]]).collect()
    }

    /// `max_i ||self_i - other_i||_inf`.
    pub fn max_abs_diff(&self, other: &PhaseStack) -> f64 {
        self.fields
            .iter()
            .zip(&other.fields)
            .flat_map(|(a, b)| a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }

    /// `(min, max)` of each field.
    pub fn ranges(&self) -> Vec<(f64, f64)> {
        self.fields
            .iter()
            .map(|f| {
                f.iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                        (lo.min(v), hi.max(v))
                    })
            })
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.fields.iter().all(|f| f.iter().all(|v| v.is_finite()))
    }
}

/// One channel vector per region code.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionMeans {
    values: Vec<Vec<f64>>,
}

impl RegionMeans {
    /// Means indexed by code value; needs `2^n` entries of equal length.
    pub fn new(values: Vec<Vec<f64>>) -> Result<Self> {
        let count = values.len();
        if count < 2 || !count.is_power_of_two() {
            return Err(invalid("means", format!("need 2^n entries, got {count}")));
        }
        let channels = values[0].len();
        if channels == 0 || values.iter().any(|v| v.len() != channels) {
            return Err(invalid(
                "means",
                "all entries need the same non-zero channel count",
            ));
        }
        Ok(Self { values })
    }

    pub fn uniform(n: usize, channels: usize, value: f64) -> Self {
        Self {
            values: vec![vec![value; channels]; 1 << n],
        }
    }

    pub fn n(&self) -> usize {
        self.values.len().trailing_zeros() as usize
    }

    pub fn channels(&self) -> usize {
        self.values[0].len()
    }

    pub fn get(&self, code: Code) -> &[f64] {
        &self.values[code.index()]
    }

    pub fn set(&mut self, code: Code, value: Vec<f64>) {
        assert_eq!(value.len(), self.channels());
        self.values[code.index()] = value;
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }
}

fn check_inputs(u: &PhaseStack, image: &ImageTensor) -> Result<()> {
    if u.dim() != image.dim() {
        return Err(Error::DimensionMismatch {
            expected: image.dim(),
            found: u.dim(),
        });
    }
    Ok(())
}

fn check_means(u: &PhaseStack, means: &RegionMeans, image: &ImageTensor) -> Result<()> {
    check_inputs(u, image)?;
    if means.values().len() != u.region_count() {
        return Err(Error::RegionCountMismatch {
            expected: u.region_count(),
            found: means.values().len(),
        });
    }
    if means.channels() != image.channels() {
        return Err(Error::ChannelMismatch {
            expected: image.channels(),
            found: means.channels(),
        });
    }
    Ok(())
}

/// `Q_b` at one pixel, given the phase values there.
pub fn region_indicator(code: Code, u: &[f64], eps1: f64) -> f64 {
    u.iter().enumerate().fold(1.0, |acc, (j, &uj)| {
        let hj = heaviside_reg(uj - 0.5, eps1);
        acc * if code.bit(j) { hj } else { 1.0 - hj }
    })
}

/// `sum_r (I_r - C_b,r)^2` per pixel for every code.
fn residual_fields(means: &RegionMeans, image: &ImageTensor) -> Vec<Field> {
    Code::all(means.n())
        .map(|b| {
            let mut res = Field::zeros(image.dim());
            for (k, &c) in means.get(b).iter().enumerate() {
                Zip::from(&mut res)
                    .and(image.channel(k))
                    .for_each(|r, &i| *r += (i - c) * (i - c));
            }
            res
        })
        .collect()
}

/// Heaviside values `H(U_j - 1/2)` for every field.
fn heaviside_fields(u: &PhaseStack, eps1: f64) -> Vec<Field> {
    u.fields()
        .iter()
        .map(|f| f.mapv(|v| heaviside_reg(v - 0.5, eps1)))
        .collect()
}

/// `Q_b` as a field for every code, leaving out factor `skip` if given.
fn region_products(heav: &[Field], skip: Option<usize>) -> Vec<Field> {
    let dim = heav[0].dim();
    Code::all(heav.len())
        .map(|b| {
            let mut q = Field::ones(dim);
            for (j, h) in heav.iter().enumerate() {
                if Some(j) == skip {
                    continue;
                }
                if b.bit(j) {
                    q *= h;
                } else {
                    Zip::from(&mut q).and(h).for_each(|q, &h| *q *= 1.0 - h);
                }
            }
            q
        })
        .collect()
}

/// Per-pixel fitting term `lambda sum_b res_b Q_b`.
pub fn fitting_term(
    u: &PhaseStack,
    means: &RegionMeans,
    image: &ImageTensor,
    lambda: f64,
    eps1: f64,
) -> Result<Field> {
    check_means(u, means, image)?;
    let res = residual_fields(means, image);
    let q = region_products(&heaviside_fields(u, eps1), None);
    let mut total = Field::zeros(u.dim());
    for (r, q) in res.iter().zip(&q) {
        Zip::from(&mut total)
            .and(r)
            .and(q)
            .for_each(|t, &r, &q| *t += r * q);
    }
    total *= lambda;
    Ok(total)
}

/// Result of a closed-form mean update.
#[derive(Debug, Clone, PartialEq)]
pub struct MeansUpdate {
    pub means: RegionMeans,
    /// Codes whose region mass fell below the emptiness threshold; their
    /// means were carried over unchanged.
    pub empty: Vec<Code>,
}

/// Region masses below `EMPTY_MASS_FRACTION * pixel_count` count as empty.
pub const EMPTY_MASS_FRACTION: f64 = 1e-8;

/// Closed-form minimizer of the energy over the region means.
///
/// Empty regions keep their `previous` mean, or the image mean when there
/// is none.
pub fn update_means(
    u: &PhaseStack,
    image: &ImageTensor,
    eps1: f64,
    previous: Option<&RegionMeans>,
) -> Result<MeansUpdate> {
    check_inputs(u, image)?;
    let n = u.n();
    let channels = image.channels();
    if let Some(prev) = previous {
        check_means(u, prev, image)?;
    }
    let q = region_products(&heaviside_fields(u, eps1), None);
    let mass: Vec<f64> = q.iter().map(|q| q.sum()).collect();
    let weighted: Vec<Vec<f64>> = q
        .iter()
        .map(|q| {
            (0..channels)
                .map(|k| {
                    Zip::from(q)
                        .and(image.channel(k))
                        .fold(0.0, |acc, &q, &i| acc + q * i)
                })
                .collect()
        })
        .collect();
    let threshold = EMPTY_MASS_FRACTION * image.pixel_count() as f64;
    let mut empty = Vec::new();
    let values = Code::all(n)
        .map(|b| {
            let m = mass[b.index()];
            if m < threshold {
                empty.push(b);
                match previous {
                    Some(prev) => prev.get(b).to_vec(),
                    None => (0..channels).map(|k| image.channel_mean(k)).collect(),
                }
            } else {
                weighted[b.index()].iter().map(|w| w / m).collect()
            }
        })
        .collect();
    Ok(MeansUpdate {
        means: RegionMeans { values },
        empty,
    })
}

/// Variational derivative of the summed fitting term with respect to `U_i`.
pub fn force(
    i: usize,
    u: &PhaseStack,
    means: &RegionMeans,
    image: &ImageTensor,
    lambda: f64,
    eps1: f64,
) -> Result<Field> {
    if i >= u.n() {
        return Err(Error::PhaseIndexOutOfRange {
            index: i,
            count: u.n(),
        });
    }
    check_means(u, means, image)?;
    let res = residual_fields(means, image);
    let heav = heaviside_fields(u, eps1);
    Ok(force_from_parts(i, u, &res, &heav, lambda, eps1))
}

/// Forces for every field, sharing the residual and Heaviside work.
pub fn forces(
    u: &PhaseStack,
    means: &RegionMeans,
    image: &ImageTensor,
    lambda: f64,
    eps1: f64,
) -> Result<Vec<Field>> {
    check_means(u, means, image)?;
    let res = residual_fields(means, image);
    let heav = heaviside_fields(u, eps1);
    Ok((0..u.n())
        .map(|i| force_from_parts(i, u, &res, &heav, lambda, eps1))
        .collect())
}

fn force_from_parts(
    i: usize,
    u: &PhaseStack,
    res: &[Field],
    heav: &[Field],
    lambda: f64,
    eps1: f64,
) -> Field {
    let others = region_products(heav, Some(i));
    let mut acc = Field::zeros(u.dim());
    for b in Code::all(u.n()).filter(|b| b.bit(i)) {
        Zip::from(&mut acc)
            .and(&res[b.index()])
            .and(&res[b.flip(i).index()])
            .and(&others[b.index()])
            .for_each(|a, &on, &off, &q| *a += (on - off) * q);
    }
    Zip::from(&mut acc)
        .and(u.field(i))
        .for_each(|a, &ui| *a *= lambda * dirac_reg(ui - 0.5, eps1));
    acc
}

/// The three pieces of the discrete energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyParts {
    /// `sum_px sum_i W(U_i) / eps`
    pub double_well: f64,
    /// `sum_px F`
    pub fitting: f64,
    /// `-sum_i eps U_i^T D_h U_i`, never negative.
    pub gradient: f64,
}

impl EnergyParts {
    pub fn total(&self) -> f64 {
        self.double_well + self.fitting + self.gradient
    }
}

pub fn energy_parts(
    u: &PhaseStack,
    means: &RegionMeans,
    image: &ImageTensor,
    params: &ModelParams,
) -> Result<EnergyParts> {
    let fit = fitting_term(u, means, image, params.lambda, params.eps1())?;
    let mut double_well_sum = 0.0;
    let mut gradient = 0.0;
    for f in u.fields() {
        double_well_sum += f.iter().map(|&v| double_well(v)).sum::<f64>();
        gradient += params.epsilon * dirichlet_sum(f, params.h);
    }
    Ok(EnergyParts {
        double_well: double_well_sum / params.epsilon,
        fitting: fit.sum(),
        gradient,
    })
}

/// `-v^T D_h v`, summed edge by edge as `sum (v_a - v_b)^2 / h^2`.
fn dirichlet_sum(v: &Field, h: f64) -> f64 {
    let sq = |a: &f64, b: &f64| (a - b) * (a - b);
    let down = Zip::from(v.slice(s![1.., ..]))
        .and(v.slice(s![..-1, ..]))
        .fold(0.0, |acc, a, b| acc + sq(a, b));
    let right = Zip::from(v.slice(s![.., 1..]))
        .and(v.slice(s![.., ..-1]))
        .fold(0.0, |acc, a, b| acc + sq(a, b));
    (down + right) / (h * h)
}

/// Discrete energy `E_h(U, C)`.
pub fn discrete_energy(
    u: &PhaseStack,
    means: &RegionMeans,
    image: &ImageTensor,
    params: &ModelParams,
) -> Result<f64> {
    Ok(energy_parts(u, means, image, params)?.total())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    const EPS1: f64 = 1.0 / 6.0;

    #[test]
    fn edge_sum_matches_stencil_quadratic_form() {
        let v = Array2::from_shape_fn((5, 7), |(r, c)| ((r * 7 + c) as f64 * 0.73).cos());
        let lap = crate::spectral::laplacian_apply(v.view(), 0.4);
        let form = -(&v * &lap).sum();
        assert!((dirichlet_sum(&v, 0.4) - form).abs() < 1e-12 * form.abs());
    }

    #[test]
    fn double_well_values() {
        assert_eq!(double_well(0.0), 0.0);
        assert_eq!(double_well(1.0), 0.0);
        assert_eq!(double_well(0.5), 1.0 / 16.0);
        // 2 * 0.25 * (-0.5) * (-0.75)
        assert!((double_well_deriv(0.25) - 0.1875).abs() < 1e-15);
    }

    #[test]
    fn double_well_deriv_matches_finite_difference() {
        let step = 1e-6;
        for u in [-0.3, 0.1, 0.37, 0.5, 0.9, 1.2] {
            let fd = (double_well(u + step) - double_well(u - step)) / (2.0 * step);
            assert!((fd - double_well_deriv(u)).abs() < 1e-8);
        }
    }

    #[test]
    fn heaviside_values() {
        assert_eq!(heaviside_reg(0.0, EPS1), 0.5);
        assert!((heaviside_reg(EPS1, EPS1) - 1.0).abs() < 1e-15);
        assert!(heaviside_reg(-EPS1, EPS1).abs() < 1e-15);
        let expected = 0.75 + 1.0 / (2.0 * PI);
        assert!((heaviside_reg(1.0 / 12.0, EPS1) - expected).abs() < 1e-14);
        assert_eq!(heaviside_reg(0.4, EPS1), 1.0);
        assert_eq!(heaviside_reg(-0.4, EPS1), 0.0);
    }

    #[test]
    fn dirac_values() {
        assert!((dirac_reg(0.0, EPS1) - 6.0).abs() < 1e-14);
        assert!(dirac_reg(EPS1, EPS1).abs() < 1e-14);
        assert!(dirac_reg(-EPS1, EPS1).abs() < 1e-14);
        let step = 1e-6;
        let u = 0.05;
        let fd = (heaviside_reg(u + step, EPS1) - heaviside_reg(u - step, EPS1)) / (2.0 * step);
        assert!((fd - dirac_reg(u, EPS1)).abs() < 1e-6);
    }

    #[test]
    fn dirac_deriv_matches_finite_difference() {
        let step = 1e-6;
        for u in [-0.12, -0.03, 0.0, 0.08, 0.15] {
            let fd = (dirac_reg(u + step, EPS1) - dirac_reg(u - step, EPS1)) / (2.0 * step);
            assert!((fd - dirac_reg_deriv(u, EPS1)).abs() < 1e-4);
        }
    }

    #[test]
    fn indicator_examples() {
        let ones = [1.0, 1.0];
        assert_eq!(region_indicator(Code(0b11), &ones, EPS1), 1.0);
        assert_eq!(region_indicator(Code(0b00), &ones, EPS1), 0.0);
        for b in Code::all(2) {
            assert_eq!(region_indicator(b, &[0.5, 0.5], EPS1), 0.25);
        }
    }

    #[test]
    fn code_bits_roundtrip() {
        let c = Code::from_bits(&[true, false, true]);
        assert_eq!(c, Code(0b101));
        assert_eq!(c.bits(3), vec![true, false, true]);
        assert_eq!(c.flip(1), Code(0b111));
        assert_eq!(Code::all(3).count(), 8);
    }

    fn gray(v: Array2<f64>) -> ImageTensor {
        ImageTensor::from_gray(v).unwrap()
    }

    #[test]
    fn fitting_single_pixel_examples() {
        let img = gray(array![[0.5]]);
        let u = PhaseStack::new(vec![array![[0.3]], array![[0.8]]]).unwrap();
        let means = RegionMeans::uniform(2, 1, 0.5);
        assert_eq!(
            fitting_term(&u, &means, &img, 7.0, EPS1).unwrap()[[0, 0]],
            0.0
        );

        let img = gray(array![[1.0]]);
        let u = PhaseStack::new(vec![array![[1.0]], array![[1.0]]]).unwrap();
        let mut means = RegionMeans::uniform(2, 1, 0.0);
        means.set(Code::from_bits(&[true, true]), vec![1.0]);
        assert_eq!(
            fitting_term(&u, &means, &img, 1.0, EPS1).unwrap()[[0, 0]],
            0.0
        );
    }

    #[test]
    fn fitting_dimension_mismatch() {
        let img = gray(Array2::zeros((3, 3)));
        let u = PhaseStack::constant(2, (3, 4), 0.0).unwrap();
        let means = RegionMeans::uniform(2, 1, 0.0);
        assert!(matches!(
            fitting_term(&u, &means, &img, 1.0, EPS1),
            Err(Error::DimensionMismatch { .. })
        ));
        let u = PhaseStack::constant(2, (3, 3), 0.0).unwrap();
        let means = RegionMeans::uniform(1, 1, 0.0);
        assert!(matches!(
            fitting_term(&u, &means, &img, 1.0, EPS1),
            Err(Error::RegionCountMismatch { .. })
        ));
    }

    #[test]
    fn two_block_means() {
        let img = gray(Array2::from_shape_fn(
            (4, 6),
            |(_, c)| if c < 3 { 0.2 } else { 0.8 },
        ));
        let u = PhaseStack::new(vec![Array2::from_shape_fn((4, 6), |(_, c)| {
            if c < 3 {
                0.0
            } else {
                1.0
            }
        })])
        .unwrap();
        let up = update_means(&u, &img, EPS1, None).unwrap();
        assert!(up.empty.is_empty());
        assert!((up.means.get(Code(1))[0] - 0.8).abs() < 1e-15);
        assert!((up.means.get(Code(0))[0] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn quadrant_means_by_code() {
        // Oracle: each binary code selects exactly one quadrant.
        let levels = [[0.0, 1.0 / 3.0], [2.0 / 3.0, 1.0]];
        let img = gray(Array2::from_shape_fn((6, 6), |(r, c)| levels[r / 3][c / 3]));
        let u1 = Array2::from_shape_fn((6, 6), |(_, c)| (c >= 3) as u8 as f64);
        let u2 = Array2::from_shape_fn((6, 6), |(r, _)| (r >= 3) as u8 as f64);
        let u = PhaseStack::new(vec![u1, u2]).unwrap();
        let up = update_means(&u, &img, EPS1, None).unwrap();
        for r in [0, 1] {
            for c in [0, 1] {
                let code = Code::from_bits(&[c == 1, r == 1]);
                assert!((up.means.get(code)[0] - levels[r][c]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn empty_region_keeps_previous_mean() {
        let img = gray(Array2::from_elem((3, 3), 0.4));
        let u = PhaseStack::constant(1, (3, 3), 0.0).unwrap();
        let prev = RegionMeans::new(vec![vec![0.1], vec![0.9]]).unwrap();
        let up = update_means(&u, &img, EPS1, Some(&prev)).unwrap();
        assert_eq!(up.empty, vec![Code(1)]);
        assert_eq!(up.means.get(Code(1)), &[0.9]);
        assert!((up.means.get(Code(0))[0] - 0.4).abs() < 1e-15);
        let fresh = update_means(&u, &img, EPS1, None).unwrap();
        assert!((fresh.means.get(Code(1))[0] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn force_vanishes_outside_delta_support_and_for_symmetric_means() {
        let img = gray(Array2::from_shape_fn((3, 3), |(r, c)| (r + c) as f64 / 4.0));
        let u = PhaseStack::new(vec![
            Array2::from_shape_fn((3, 3), |(r, _)| 0.2 + 0.3 * r as f64),
            Array2::from_elem((3, 3), 0.45),
        ])
        .unwrap();
        let means = RegionMeans::new(vec![vec![0.1], vec![0.3], vec![0.6], vec![0.9]]).unwrap();
        let f = force(0, &u, &means, &img, 10.0, EPS1).unwrap();
        // rows 0 and 2 have |u - 1/2| = 0.3 > eps1
        for c in 0..3 {
            assert_eq!(f[[0, c]], 0.0);
            assert_eq!(f[[2, c]], 0.0);
            assert!(f[[1, c]] != 0.0);
        }
        // C11 = C21 and C12 = C22
        let sym = RegionMeans::new(vec![vec![0.2], vec![0.2], vec![0.7], vec![0.7]]).unwrap();
        let f = force(0, &u, &sym, &img, 10.0, EPS1).unwrap();
        assert!(f.iter().all(|v| *v == 0.0));
        assert!(matches!(
            force(2, &u, &sym, &img, 10.0, EPS1),
            Err(Error::PhaseIndexOutOfRange { .. })
        ));
    }

    #[test]
    fn force_matches_printed_two_field_formulas() {
        let img = gray(array![[0.3, 0.7], [0.55, 0.05]]);
        let u = PhaseStack::new(vec![
            array![[0.45, 0.52], [0.6, 0.38]],
            array![[0.55, 0.41], [0.5, 0.63]],
        ])
        .unwrap();
        let c11 = 0.9;
        let c12 = 0.6;
        let c21 = 0.35;
        let c22 = 0.1;
        let mut means = RegionMeans::uniform(2, 1, 0.0);
        means.set(Code::from_bits(&[true, true]), vec![c11]);
        means.set(Code::from_bits(&[true, false]), vec![c12]);
        means.set(Code::from_bits(&[false, true]), vec![c21]);
        means.set(Code::from_bits(&[false, false]), vec![c22]);
        let lambda = 3.0;
        let f1 = force(0, &u, &means, &img, lambda, EPS1).unwrap();
        let f2 = force(1, &u, &means, &img, lambda, EPS1).unwrap();
        for r in 0..2 {
            for c in 0..2 {
                let i = img.get(r, c, 0);
                let (a, b) = (u.field(0)[[r, c]], u.field(1)[[r, c]]);
                let h1 = heaviside_reg(a - 0.5, EPS1);
                let h2 = heaviside_reg(b - 0.5, EPS1);
                let d1 = dirac_reg(a - 0.5, EPS1);
                let d2 = dirac_reg(b - 0.5, EPS1);
                let sq = |m: f64| (i - m) * (i - m);
                let p1 = lambda
                    * ((sq(c11) - sq(c21)) * h2 * d1 + (sq(c12) - sq(c22)) * (1.0 - h2) * d1);
                let p2 = lambda
                    * ((sq(c11) - sq(c12)) * h1 * d2 + (sq(c21) - sq(c22)) * (1.0 - h1) * d2);
                assert!((f1[[r, c]] - p1).abs() < 1e-12);
                assert!((f2[[r, c]] - p2).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn energy_examples() {
        let img = gray(Array2::from_elem((3, 3), 0.25));
        let u = PhaseStack::constant(2, (3, 3), 0.0).unwrap();
        let means = RegionMeans::uniform(2, 1, 0.25);
        let params = ModelParams::default();
        assert_eq!(discrete_energy(&u, &means, &img, &params).unwrap(), 0.0);

        for n in 1..=3 {
            let img = gray(Array2::from_elem((2, 2), 0.6));
            let u = PhaseStack::constant(n, (2, 2), 0.5).unwrap();
            let means = RegionMeans::uniform(n, 1, 0.6);
            let params = ModelParams {
                epsilon: 1.0,
                ..ModelParams::default()
            };
            let e = discrete_energy(&u, &means, &img, &params).unwrap();
            assert!((e - n as f64 / 4.0).abs() < 1e-14);
        }
    }

    #[test]
    fn stabilizer_bound_examples() {
        let g = stabilizer_bound(4.0, 40.0, 1, 1.0 / 6.0).unwrap();
        assert!((g - (0.5 + 2880.0 * PI)).abs() < 1e-9);
        assert!((g - 9048.29).abs() < 0.01);
        assert_eq!(stabilizer_bound(4.0, 0.0, 1, EPS1).unwrap(), 0.5);
        let g1 = stabilizer_bound(2.0, 5.0, 1, EPS1).unwrap() - 1.0;
        let g3 = stabilizer_bound(2.0, 5.0, 2, EPS1).unwrap() - 1.0;
        assert!((g3 - 2.0 * g1).abs() < 1e-9);
        assert!(stabilizer_bound(0.0, 1.0, 1, EPS1).is_err());
        assert!(stabilizer_bound(1.0, 1.0, 0, EPS1).is_err());
        assert!(stabilizer_bound(1.0, 1.0, 1, -0.1).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(ModelParams::default().validate().is_ok());
        let bad_p = ModelParams {
            p: 4,
            ..ModelParams::default()
        };
        assert!(bad_p.validate().is_err());
        let p1 = ModelParams {
            p: 1,
            ..ModelParams::default()
        };
        assert!(p1.validate().is_err());
        let neg = ModelParams {
            epsilon: -1.0,
            ..ModelParams::default()
        };
        assert!(neg.validate().is_err());
        assert!(ModelParams::default().eps1() <= 1.0 / 6.0);
    }

    #[test]
    fn enforce_mode_raises_stabilizer() {
        let p = ModelParams {
            mbp_mode: MbpMode::EnforceGamma,
            ..ModelParams::default()
        };
        let eff = p.effective(3).unwrap();
        assert_eq!(eff.stabilizer, p.gamma(3).unwrap());
        let user = ModelParams::default().effective(3).unwrap();
        assert_eq!(user.stabilizer, 120.0);
    }
}
