//! Exponential time differencing for the stabilized phase-field system
//!
//! ```text
//! dU_i/dt + L_h U_i = N(U_i),   L_h = -2 eps D_h + S I,
//! N(U_i) = S U_i - w(U_i) / eps - f_i(U, C)
//! ```
//!
//! The `n` equations are coupled through `f_i`; within one step every
//! nonlinear term is evaluated from the fields at the start of that stage,
//! so the per-field updates are independent and run in parallel.

use ndarray::{ArrayView2, Zip};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::ImageTensor;
use crate::model::{
    discrete_energy, double_well_deriv, force, forces, ModelParams, PhaseStack, RegionMeans,
};
use crate::spectral::SpectralPlan;
use crate::Field;

/// Slack allowed when checking that iterates stay inside `[0, 1]`.
pub const MBP_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Etd1,
    Etdrk2,
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Scheme::Etd1 => "etd1",
            Scheme::Etdrk2 => "etdrk2",
        })
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "etd1" => Ok(Scheme::Etd1),
            "etdrk2" => Ok(Scheme::Etdrk2),
            other => Err(crate::error::invalid(
                "scheme",
                format!("expected etd1 or etdrk2, got {other:?}"),
            )),
        }
    }
}

/// Diagnostics of one steady-state solve.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct SolveReport {
    /// Time steps taken.
    pub iterations: usize,
    /// `max_i ||U_i^{k+1} - U_i^k||_inf` of the last step.
    pub final_change: f64,
    pub converged: bool,
    /// `(min, max)` of every field after each step.
    pub ranges: Vec<Vec<(f64, f64)>>,
    /// Steps after which some value left `[0, 1]` by more than [`MBP_SLACK`].
    pub mbp_violations: usize,
    /// `E_h` at the initial state and after every step.
    pub energy: Vec<f64>,
    /// Stabilizer used by the solve.
    pub stabilizer: f64,
}

/// Builds the plan a solve with `params` needs on `dim`, applying the
/// stabilizer rule for `channels`.
pub fn plan_for(
    dim: (usize, usize),
    params: &ModelParams,
    channels: usize,
) -> Result<SpectralPlan> {
    let eff = params.effective(channels)?;
    SpectralPlan::new(dim.0, dim.1, eff.h, eff.epsilon, eff.stabilizer, eff.dt)
}

fn check_plan(plan: &SpectralPlan, u: &PhaseStack, params: &ModelParams) -> Result<()> {
    if plan.dim() != u.dim() {
        return Err(Error::DimensionMismatch {
            expected: plan.dim(),
            found: u.dim(),
        });
    }
    let pairs = [
        ("h", plan.h(), params.h),
        ("epsilon", plan.epsilon(), params.epsilon),
        ("S", plan.stabilizer(), params.stabilizer),
        ("dt", plan.dt(), params.dt),
    ];
    for (name, planned, wanted) in pairs {
        if planned != wanted {
            return Err(Error::PlanMismatch(format!(
                "{name}: plan has {planned}, parameters have {wanted}"
            )));
        }
    }
    Ok(())
}

fn assemble(s: f64, eps: f64, ui: &Field, fi: &Field) -> Field {
    let mut out = Field::zeros(ui.dim());
    Zip::from(&mut out)
        .and(ui)
        .and(fi)
        .for_each(|o, &v, &f| *o = s * v - double_well_deriv(v) / eps - f);
    out
}

/// `N(U_i)` with the other fields frozen at their current values.
pub fn nonlinear_term(
    i: usize,
    u: &PhaseStack,
    means: &RegionMeans,
    image: &ImageTensor,
    params: &ModelParams,
) -> Result<Field> {
    let fi = force(i, u, means, image, params.lambda, params.eps1())?;
    Ok(assemble(params.stabilizer, params.epsilon, u.field(i), &fi))
}

/// `N(U_i)` for every field.
pub fn nonlinear_terms(
    u: &PhaseStack,
    means: &RegionMeans,
    image: &ImageTensor,
    params: &ModelParams,
) -> Result<Vec<Field>> {
    let f = forces(u, means, image, params.lambda, params.eps1())?;
    Ok(u.fields()
        .par_iter()
        .zip(f.par_iter())
        .map(|(ui, fi)| assemble(params.stabilizer, params.epsilon, ui, fi))
        .collect())
}

/// `phi_0(dt L) u + dt phi_1(dt L) n_u`.
pub fn etd1_combine<'a>(
    plan: &SpectralPlan,
    u: ArrayView2<'a, f64>,
    n_u: ArrayView2<'a, f64>,
) -> Result<Field> {
    plan.apply_phi_sum(&[(0, 1.0, u), (1, plan.dt(), n_u)])
}

/// Corrector `u_hat + dt phi_2(dt L) (n_hat - n_u)`.
pub fn etdrk2_combine(
    plan: &SpectralPlan,
    u_hat: ArrayView2<'_, f64>,
    n_u: ArrayView2<'_, f64>,
    n_hat: ArrayView2<'_, f64>,
) -> Result<Field> {
    let diff = &n_hat - &n_u;
    let mut out = plan.apply_phi(2, diff.view())?;
    out *= plan.dt();
    out += &u_hat;
    Ok(out)
}

fn etd1_from(plan: &SpectralPlan, u: &PhaseStack, n_u: &[Field]) -> Result<PhaseStack> {
    let fields = u
        .fields()
        .par_iter()
        .zip(n_u.par_iter())
        .map(|(ui, ni)| etd1_combine(plan, ui.view(), ni.view()))
        .collect::<Result<Vec<_>>>()?;
    PhaseStack::new(fields)
}

/// One first-order step. The stabilizer rule of `params` is applied first.
pub fn etd1_step(
    u: &PhaseStack,
    means: &RegionMeans,
    image: &ImageTensor,
    plan: &SpectralPlan,
    params: &ModelParams,
) -> Result<PhaseStack> {
    let params = &params.effective(image.channels())?;
    check_plan(plan, u, params)?;
    let n_u = nonlinear_terms(u, means, image, params)?;
    etd1_from(plan, u, &n_u)
}

/// One second-order Runge-Kutta step: an ETD1 predictor followed by the
/// linear-interpolation corrector.
pub fn etdrk2_step(
    u: &PhaseStack,
    means: &RegionMeans,
    image: &ImageTensor,
    plan: &SpectralPlan,
    params: &ModelParams,
) -> Result<PhaseStack> {
    let params = &params.effective(image.channels())?;
    check_plan(plan, u, params)?;
    let n_u = nonlinear_terms(u, means, image, params)?;
    let u_hat = etd1_from(plan, u, &n_u)?;
    let n_hat = nonlinear_terms(&u_hat, means, image, params)?;
    let fields = (0..u.n())
        .into_par_iter()
        .map(|i| etdrk2_combine(plan, u_hat.field(i).view(), n_u[i].view(), n_hat[i].view()))
        .collect::<Result<Vec<_>>>()?;
    PhaseStack::new(fields)
}

pub fn step(
    scheme: Scheme,
    u: &PhaseStack,
    means: &RegionMeans,
    image: &ImageTensor,
    plan: &SpectralPlan,
    params: &ModelParams,
) -> Result<PhaseStack> {
    match scheme {
        Scheme::Etd1 => etd1_step(u, means, image, plan, params),
        Scheme::Etdrk2 => etdrk2_step(u, means, image, plan, params),
    }
}

/// Steps with frozen means until the fields stop changing by more than
/// `tol_steady` or `max_inner` steps were taken.
///
/// The plan must be built for `params` after the stabilizer rule, see
/// [`plan_for`].
pub fn solve_to_steady(
    u0: &PhaseStack,
    means: &RegionMeans,
    image: &ImageTensor,
    plan: &SpectralPlan,
    params: &ModelParams,
    scheme: Scheme,
) -> Result<(PhaseStack, SolveReport)> {
    params.validate()?;
    let params = params.effective(image.channels())?;
    check_plan(plan, u0, &params)?;
    let mut u = u0.clone();
    let mut report = SolveReport {
        stabilizer: params.stabilizer,
        energy: vec![discrete_energy(&u, means, image, &params)?],
        ..SolveReport::default()
    };
    for k in 1..=params.max_inner {
        let next = step(scheme, &u, means, image, plan, &params)?;
        if let Some(field) = next
            .fields()
            .iter()
            .position(|f| f.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::NonFinite { field, step: k });
        }
        let change = next.max_abs_diff(&u);
        let ranges = next.ranges();
        if ranges
            .iter()
            .any(|&(lo, hi)| lo < -MBP_SLACK || hi > 1.0 + MBP_SLACK)
        {
            report.mbp_violations += 1;
        }
        report.ranges.push(ranges);
        report
            .energy
            .push(discrete_energy(&next, means, image, &params)?);
        report.iterations = k;
        report.final_change = change;
        u = next;
        if change <= params.tol_steady {
            report.converged = true;
            break;
        }
    }
    Ok((u, report))
}
