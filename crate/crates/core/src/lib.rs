//! Spatial SIR epidemic model on a 1-D Neumann domain, driven by compensated
//! Poisson jump noise, with deterministic and Gaussian baselines.
//!
//! The crate is organised bottom-up:
//!
//! - [`grid`]: cell-centred mesh, Neumann Laplacian, quadrature and norms.
//! - [`semigroup`]: exact discrete heat semigroup, resolvent, Yosida approximation.
//! - [`model`]: coefficients, incidence, reaction and jump operators, truncation.
//! - [`noise`]: compound-Poisson event sampling and Gaussian increments.
//! - [`schemes`]: time steppers, single-path runs and ensembles.
//! - [`diagnostics`]: positivity functional, sup-norm monitor, isometry check.

pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod model;
pub mod noise;
pub mod schemes;
pub mod semigroup;

pub use error::SimError;
pub use grid::{Grid1D, ScalarField, StateField};
pub use model::{Incidence, JumpCoefficients, ModelParams};
pub use noise::{JumpEvent, MarkMeasure, PathSeed};
pub use schemes::{
    EnsembleStats, NoiseSpec, SchemeConfig, SchemeKind, Stepper, TrajectoryRecord,
};
pub use semigroup::DiffusionOperator;
