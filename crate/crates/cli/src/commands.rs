//! The `init`, `segment` and `verify` subcommands.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use accv::admm::{admm_solve, extract_contours, RunResult};
use accv::iglim::phase_codes;
use accv::verify::{bound_excess, energy_increases, phi_oracle_errors};
use accv::{combine_phases, multi_iglim, Code, ImageTensor, MbpMode, SpectralPlan};
use serde::Serialize;
use serde_json::json;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::imaging::{contours_png, field_png, labels_png, load_image, mask_png};

/// Largest deviation allowed between the fast and dense `phi` products.
pub const PHI_TOLERANCE: f64 = 1e-10;

/// Side of the crop used by the `phi` check.
pub const PHI_CROP: usize = 8;

/// Files produced by a command, written together once everything is computed.
#[derive(Default)]
struct Artifacts {
    files: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    fn add(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.files.push((name.into(), bytes));
    }

    fn add_json(&mut self, name: &str, value: &impl Serialize) {
        let mut text = serde_json::to_string_pretty(value).expect("plain data serializes");
        text.push('\n');
        self.add(name, text.into_bytes());
    }

    /// Writes every file under a temporary name, then renames them all.
    /// On failure the temporary files are removed.
    fn write(self, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
        let io = |what: &str, path: &Path, e: std::io::Error| {
            CliError::Io(format!("cannot {what} {}: {e}", path.display()))
        };
        fs::create_dir_all(dir).map_err(|e| io("create", dir, e))?;
        let mut staged = Vec::new();
        let cleanup = |staged: &[(PathBuf, PathBuf)]| {
            for (tmp, _) in staged {
                let _ = fs::remove_file(tmp);
            }
        };
        for (name, bytes) in &self.files {
            let tmp = dir.join(format!(".{name}.partial"));
            if let Err(e) = fs::write(&tmp, bytes) {
                cleanup(&staged);
                let _ = fs::remove_file(&tmp);
                return Err(io("write", &tmp, e));
            }
            staged.push((tmp, dir.join(name)));
        }
        for (k, (tmp, dst)) in staged.iter().enumerate() {
            if let Err(e) = fs::rename(tmp, dst) {
                cleanup(&staged[k..]);
                return Err(io("write", dst, e));
            }
        }
        Ok(staged.into_iter().map(|(_, dst)| dst).collect())
    }
}

fn prepare(config: &RunConfig) -> Result<ImageTensor, CliError> {
    config.validate()?;
    load_image(config.input()?, config.rescale)
}

fn bit_string(code: Code, n: usize) -> String {
    code.bits(n)
        .iter()
        .map(|&b| if b { '1' } else { '0' })
        .collect()
}

/// Edge masks of the initialization, their codes and the initial fields.
pub fn init(config: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let image = prepare(config)?;
    let masks = multi_iglim(&image, &config.init_params())?;
    let codes = phase_codes(&masks)?;
    let u0 = combine_phases(&masks)?;
    let mut out = Artifacts::default();
    for (k, mask) in masks.iter().enumerate() {
        out.add(format!("mask_{}.png", k + 1), mask_png(mask));
    }
    for i in 0..u0.n() {
        out.add(format!("init_u_{}.png", i + 1), field_png(&u0, i));
    }
    let listing: Vec<_> = masks
        .iter()
        .zip(&codes)
        .enumerate()
        .map(|(k, (mask, &code))| {
            json!({
                "mask": k + 1,
                "pixels": mask.count(),
                "code": bit_string(code, u0.n()),
            })
        })
        .collect();
    out.add_json(
        "init.json",
        &json!({ "height": image.height(), "width": image.width(), "n": u0.n(), "masks": listing }),
    );
    out.write(&config.output)
}

fn summary(config: &RunConfig, image: &ImageTensor, run: &RunResult) -> serde_json::Value {
    let n = run.phases.n();
    let sizes = run.labels.region_sizes();
    let regions: Vec<_> = Code::all(n)
        .map(|code| {
            json!({
                "label": code.0,
                "code": bit_string(code, n),
                "pixels": sizes[code.index()],
                "mean": run.means.get(code),
            })
        })
        .collect();
    let trace = &run.trace;
    let energy_increases: usize = trace
        .records
        .iter()
        .map(|r| energy_increases(&r.inner.energy).len())
        .sum::<usize>()
        + energy_increases(&trace.checkpoint_energies()).len();
    json!({
        "input": config.input,
        "height": image.height(),
        "width": image.width(),
        "channels": image.channels(),
        "m": config.m,
        "n": n,
        "scheme": trace.scheme,
        "mbp_mode": config.mbp_mode,
        "stabilizer": trace.stabilizer,
        "gamma": trace.gamma,
        "converged": trace.converged(),
        "stop_reason": trace.stop_reason,
        "outer_iterations": trace.outer_iterations(),
        "inner_iterations": trace.records.iter().map(|r| r.inner.iterations).collect::<Vec<_>>(),
        "total_inner_iterations": trace.total_inner_iterations(),
        "inner_solves_converged": trace.records.iter().all(|r| r.inner.converged),
        "mbp_violations": trace.mbp_violations(),
        "max_bound_excess": bound_excess(trace.records.iter().flat_map(|r| r.inner.ranges.iter().flatten())),
        "energy_increases": energy_increases,
        "final_energy": trace.checkpoint_energies().last(),
        "empty_regions": sizes.iter().filter(|&&s| s == 0).count(),
        "regions": regions,
    })
}

/// Outcome of a finished segmentation run.
#[derive(Debug)]
pub struct SegmentOutcome {
    pub written: Vec<PathBuf>,
    pub converged: bool,
    pub outer_iterations: usize,
}

/// Initialization, alternating minimization and all artifacts. Artifacts
/// are written even when the run hits `max_outer`.
pub fn segment(config: &RunConfig) -> Result<SegmentOutcome, CliError> {
    let t0 = Instant::now();
    let image = prepare(config)?;
    let t_load = t0.elapsed().as_secs_f64();
    let masks = multi_iglim(&image, &config.init_params())?;
    let u0 = combine_phases(&masks)?;
    let t_init = t0.elapsed().as_secs_f64() - t_load;
    let run = admm_solve(&image, &u0, &config.model_params(), config.scheme)?;
    if !run.phases.is_finite() {
        return Err(CliError::NonFinite(
            "phase fields left the finite range".into(),
        ));
    }
    let t_solve = t0.elapsed().as_secs_f64() - t_load - t_init;

    let mut out = Artifacts::default();
    out.add("labels.png", labels_png(&run.labels));
    out.add(
        "contours.png",
        contours_png(&image, &extract_contours(&run.labels)),
    );
    for i in 0..run.phases.n() {
        out.add(format!("u_{}.png", i + 1), field_png(&run.phases, i));
    }
    out.add("energy.csv", run.trace.to_csv().into_bytes());
    out.add_json("summary.json", &summary(config, &image, &run));
    out.add_json(
        "timing.json",
        &json!({
            "threads": rayon::current_num_threads(),
            "load_seconds": t_load,
            "init_seconds": t_init,
            "solve_seconds": t_solve,
            "total_seconds": t0.elapsed().as_secs_f64(),
        }),
    );
    let written = out.write(&config.output)?;
    Ok(SegmentOutcome {
        written,
        converged: run.trace.converged(),
        outer_iterations: run.trace.outer_iterations(),
    })
}

/// Result of one property check.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Runs the property suite on the configured input with the stabilizer
/// raised to the bound.
pub fn verify(config: &RunConfig) -> Result<Vec<Check>, CliError> {
    let image = prepare(config)?;
    let masks = multi_iglim(&image, &config.init_params())?;
    let u0 = combine_phases(&masks)?;
    let params = accv::ModelParams {
        mbp_mode: MbpMode::EnforceGamma,
        ..config.model_params()
    };
    let run = admm_solve(&image, &u0, &params, config.scheme)?;
    let trace = &run.trace;

    let excess = bound_excess(
        trace
            .records
            .iter()
            .flat_map(|r| r.inner.ranges.iter().flatten()),
    );
    let mbp = Check {
        name: "mbp",
        passed: trace.mbp_violations() == 0,
        detail: format!(
            "S = {:.4} >= gamma = {:.4}, {} steps, {} violations, max excess {excess:.3e}",
            trace.stabilizer,
            trace.gamma,
            trace.total_inner_iterations(),
            trace.mbp_violations()
        ),
    };

    let inner: usize = trace
        .records
        .iter()
        .map(|r| energy_increases(&r.inner.energy).len())
        .sum();
    let outer = energy_increases(&trace.checkpoint_energies()).len();
    let energy = Check {
        name: "energy",
        passed: inner == 0 && outer == 0,
        detail: format!("{inner} increases over inner steps, {outer} over stage checkpoints"),
    };

    let (rows, cols) = (PHI_CROP.min(image.height()), PHI_CROP.min(image.width()));
    let crop = image.crop(
        (image.height() - rows) / 2,
        (image.width() - cols) / 2,
        rows,
        cols,
    )?;
    let eff = params.effective(image.channels())?;
    let plan = SpectralPlan::new(rows, cols, eff.h, eff.epsilon, eff.stabilizer, eff.dt)?;
    let errors = phi_oracle_errors(&plan, crop.channel(0))?;
    let worst = errors.iter().copied().fold(0.0, f64::max);
    let phi = Check {
        name: "phi",
        passed: worst <= PHI_TOLERANCE,
        detail: format!(
            "{rows}x{cols} crop, errors phi0 {:.2e} phi1 {:.2e} phi2 {:.2e}",
            errors[0], errors[1], errors[2]
        ),
    };
    Ok(vec![mbp, energy, phi])
}
