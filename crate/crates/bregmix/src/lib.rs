//! Experiment harness and command-line front end for `bregmix-core`.
//!
//! Reads JSON experiment configs, runs seeded Monte Carlo ensembles of
//! constituent banks and combiners, evolves the transient recursions and
//! writes CSV curves with a manifest.

pub mod compare;
pub mod config;
pub mod error;
pub mod harness;
pub mod output;

pub use config::{ConfigErrors, ExperimentConfig, ResolvedConfig};
pub use error::{AppError, Result};
pub use harness::{run_ensemble, CurveSet, Execution, TheoryCurves};
