//! Run configuration: a JSON file whose keys follow the model symbols,
//! overridden by command-line flags.

use std::path::{Path, PathBuf};

use accv::{InitParams, MbpMode, ModelParams, Scheme};
use clap::Args;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Largest number of regions the fixed label palette can color.
pub const MAX_REGIONS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub output: PathBuf,
    /// Target `[height, width]` of a bilinear resize applied after loading.
    pub rescale: Option<[usize; 2]>,
    pub epsilon: f64,
    pub lambda: f64,
    pub h: f64,
    #[serde(rename = "S")]
    pub stabilizer: f64,
    pub dt: f64,
    pub kappa: f64,
    pub sigma: f64,
    /// Diagonal-connectivity denoising sweeps.
    #[serde(rename = "M")]
    pub denoise_sweeps: usize,
    /// Number of phases.
    pub m: usize,
    pub p: u32,
    pub seed: u64,
    pub tol_steady: f64,
    pub tol_outer: f64,
    pub max_inner: usize,
    pub max_outer: usize,
    pub scheme: Scheme,
    pub mbp_mode: MbpMode,
}

impl Default for RunConfig {
    fn default() -> Self {
        let model = ModelParams::default();
        let init = InitParams::default();
        Self {
            input: None,
            output: PathBuf::from("seg-out"),
            rescale: None,
            epsilon: model.epsilon,
            lambda: model.lambda,
            h: model.h,
            stabilizer: model.stabilizer,
            dt: model.dt,
            kappa: init.kappa,
            sigma: init.sigma,
            denoise_sweeps: init.denoise_sweeps,
            m: init.phases,
            p: model.p,
            seed: init.seed,
            tol_steady: model.tol_steady,
            tol_outer: model.tol_outer,
            max_inner: model.max_inner,
            max_outer: model.max_outer,
            scheme: Scheme::Etdrk2,
            mbp_mode: model.mbp_mode,
        }
    }
}

/// Flags that replace values from the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// Input image (PNG, PGM or PPM).
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Resize the input to HEIGHTxWIDTH before segmenting.
    #[arg(long, value_name = "HxW", value_parser = parse_dims)]
    pub rescale: Option<[usize; 2]>,
    #[arg(long, allow_negative_numbers = true)]
    pub epsilon: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub lambda: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub h: Option<f64>,
    /// Stabilizer.
    #[arg(long = "S", allow_negative_numbers = true)]
    pub stabilizer: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub dt: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub kappa: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub sigma: Option<f64>,
    /// Denoising sweeps.
    #[arg(long = "M")]
    pub denoise_sweeps: Option<usize>,
    /// Number of phases.
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub p: Option<u32>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, allow_negative_numbers = true)]
    pub tol_steady: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub tol_outer: Option<f64>,
    #[arg(long)]
    pub max_inner: Option<usize>,
    #[arg(long)]
    pub max_outer: Option<usize>,
    /// etd1 or etdrk2.
    #[arg(long)]
    pub scheme: Option<Scheme>,
    /// enforce-gamma or user-s.
    #[arg(long, value_parser = parse_mbp_mode)]
    pub mbp_mode: Option<MbpMode>,
}

fn parse_dims(s: &str) -> Result<[usize; 2], String> {
    let (h, w) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected HEIGHTxWIDTH, got {s:?}"))?;
    let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("{v:?}: {e}"));
    Ok([parse(h)?, parse(w)?])
}

fn parse_mbp_mode(s: &str) -> Result<MbpMode, String> {
    serde_json::from_value(serde_json::Value::String(s.to_owned()))
        .map_err(|_| format!("expected enforce-gamma or user-s, got {s:?}"))
}

impl RunConfig {
    /// Reads `path`; relative paths inside the file are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
        let mut config: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        config.input = config.input.map(|p| base.join(p));
        config.output = base.join(&config.output);
        Ok(config)
    }

    pub fn apply(&mut self, o: &Overrides) {
        fn set<T: Clone>(slot: &mut T, value: &Option<T>) {
            if let Some(v) = value {
                *slot = v.clone();
            }
        }
        if o.input.is_some() {
            self.input = o.input.clone();
        }
        if o.rescale.is_some() {
            self.rescale = o.rescale;
        }
        set(&mut self.output, &o.output);
        set(&mut self.epsilon, &o.epsilon);
        set(&mut self.lambda, &o.lambda);
        set(&mut self.h, &o.h);
        set(&mut self.stabilizer, &o.stabilizer);
        set(&mut self.dt, &o.dt);
        set(&mut self.kappa, &o.kappa);
        set(&mut self.sigma, &o.sigma);
        set(&mut self.denoise_sweeps, &o.denoise_sweeps);
        set(&mut self.m, &o.m);
        set(&mut self.p, &o.p);
        set(&mut self.seed, &o.seed);
        set(&mut self.tol_steady, &o.tol_steady);
        set(&mut self.tol_outer, &o.tol_outer);
        set(&mut self.max_inner, &o.max_inner);
        set(&mut self.max_outer, &o.max_outer);
        set(&mut self.scheme, &o.scheme);
        set(&mut self.mbp_mode, &o.mbp_mode);
    }

    pub fn model_params(&self) -> ModelParams {
        ModelParams {
            epsilon: self.epsilon,
            lambda: self.lambda,
            p: self.p,
            h: self.h,
            stabilizer: self.stabilizer,
            dt: self.dt,
            tol_steady: self.tol_steady,
            tol_outer: self.tol_outer,
            max_inner: self.max_inner,
            max_outer: self.max_outer,
            mbp_mode: self.mbp_mode,
        }
    }

    pub fn init_params(&self) -> InitParams {
        InitParams {
            kappa: self.kappa,
            sigma: self.sigma,
            denoise_sweeps: self.denoise_sweeps,
            phases: self.m,
            seed: self.seed,
        }
    }

    pub fn input(&self) -> Result<&Path, CliError> {
        self.input
            .as_deref()
            .ok_or_else(|| CliError::Config("no input image given".into()))
    }

    /// Checks every numeric constraint before any work starts.
    pub fn validate(&self) -> Result<(), CliError> {
        self.model_params().validate()?;
        self.init_params().validate()?;
        if self.m > MAX_REGIONS {
            return Err(CliError::Config(format!(
                "m = {} exceeds the {MAX_REGIONS}-color label palette",
                self.m
            )));
        }
        if let Some([h, w]) = self.rescale {
            if h == 0 || w == 0 {
                return Err(CliError::Config("rescale target must be non-empty".into()));
            }
        }
        self.input()?;
        Ok(())
    }
}
