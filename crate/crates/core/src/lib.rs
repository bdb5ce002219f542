//! Multi-phase image segmentation with the Allen-Cahn Chan-Vese model.
//!
//! The pipeline has two halves:
//!
//! * [`iglim`] builds initial phase fields from edge pixels of a graph
//!   Laplacian, clustered by intensity and cleaned by diagonal connectivity.
//! * [`admm`] alternates steady-state solves of `n` coupled Allen-Cahn
//!   equations ([`etd`]) with closed-form region-mean updates ([`model`]),
//!   until the label map settles.
//!
//! `n` phase fields separate up to `2^n` regions.

pub mod admm;
pub mod error;
pub mod etd;
pub mod iglim;
pub mod image;
pub mod metrics;
pub mod model;
pub mod spectral;
pub mod synthetic;
pub mod verify;

/// A scalar field on the image grid, indexed `(row, col)`.
pub type Field = ndarray::Array2<f64>;

pub use admm::{admm_solve, extract_contours, extract_labels, LabelMap, RunResult, RunTrace};
pub use error::{Error, Result};
pub use etd::{Scheme, SolveReport};
pub use iglim::{combine_phases, multi_iglim, EdgeMask, InitParams};
pub use image::ImageTensor;
pub use model::{Code, MbpMode, ModelParams, PhaseStack, RegionMeans};
pub use spectral::SpectralPlan;
