//! Adaptive mixtures of LMS filters trained with multiplicative updates.
//!
//! A bank of first-stage LMS filters runs on the same regressor; a second
//! stage combines their outputs with exponentiated-gradient updates derived
//! from Bregman divergences. Two distances are supported:
//!
//! * unnormalized relative entropy, giving the EGU update, and
//! * relative entropy on an extended simplex of total mass `u`, giving EG.
//!
//! Both are available with the affine constraint (weights summing to one) or
//! without constraint, alongside plain LMS combiners as baselines. The
//! [`transient`] module evolves the first and second moments of the mixture
//! weights from ensemble regressor statistics, so simulations can be checked
//! against the closed-form mean-square behaviour.
//!
//! The crate is `no_std` (with `alloc`) when built without the `std` feature.

#![cfg_attr(not(feature = "std"), no_std)]
// NaN must fail these checks, so comparisons are negated on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod constituent;
pub mod diagnostics;
pub mod error;
pub mod mixture;
pub mod moments;
pub mod rng;
pub mod signal;
pub mod transient;

pub use constituent::{FilterBank, LmsFilter};
pub use error::{Error, Result};
pub use mixture::{
    AffineLms, AffineMixture, Algorithm, AnyMixture, Mixture, MixtureStep, Multiplicative,
    UnconstrainedLms, UnconstrainedMixture, UpdateForm,
};
pub use moments::{estimate_moments, MomentEstimates, MomentSample};
pub use signal::{Sample, SignalModel, SignalModelConfig};
pub use transient::{OptimumSolution, TheoreticalMoments, TransientModel};

/// Dense column vector used by the moment recursions.
pub type Vector = nalgebra::DVector<f64>;
/// Dense matrix used by the moment recursions.
pub type Matrix = nalgebra::DMatrix<f64>;
