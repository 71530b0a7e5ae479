//! PadamP: partially adaptive moment estimation with tangent-space
//! projection, a family of baseline optimizers, desk-scale objectives, and
//! executable convergence diagnostics.
//!
//! Layout:
//! - [`types`]: parameter groups, hyperparameters, optimizer state, telemetry
//! - [`geometry`]: cosine similarity, tangent projection, projection trigger
//! - [`optimizers`]: PadamP, AdamP, Padam, Adam, AMSGrad, SGDM step rules
//! - [`objectives`]: analytic and synthetic-data test problems
//! - [`diagnostics`]: norm-growth simulator, moment bound checkers, schedules
//! - [`harness`]: configs, schedules, run loop, sweeps, CSV output

pub mod diagnostics;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod objectives;
pub mod optimizers;
pub mod types;

pub use error::{Error, Result};
pub use optimizers::{Optimizer, OptimizerKind, StepOptions};
pub use types::{GradientSet, HyperParams, OptimizerState, ParamGroup, StepRecord};
