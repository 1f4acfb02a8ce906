//! Second-stage combiners.
//!
//! The multiplicative combiners keep an augmented nonnegative vector
//! `[z1; z2]` whose difference `z1 - z2` gives signed weights. Each step
//! multiplies the first half by `exp(+mu e g)` and the second half by
//! `exp(-mu e g)`, where `g` is the combiner regressor (`x` unconstrained,
//! `delta = x_i - x_m` affine). EG then rescales the whole augmented vector
//! to total mass `u`.
//!
//! Prediction and error in a step always use the weights from before the
//! update.

mod affine;
mod lms;
mod unconstrained;

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

pub use affine::AffineMixture;
pub use lms::{AffineLms, UnconstrainedLms};
pub use unconstrained::UnconstrainedMixture;

use crate::error::{Error, Result};

/// Exponent arguments are clamped to `[-EXPONENT_LIMIT, EXPONENT_LIMIT]`.
pub const EXPONENT_LIMIT: f64 = 700.0;

/// Floor applied to zero-valued halves of the unconstrained EG start when `u = 1`.
pub const EG_INIT_FLOOR: f64 = 1e-6;

/// Which Bregman distance drives a multiplicative combiner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Multiplicative {
    /// Unnormalized relative entropy.
    Egu,
    /// Relative entropy on the extended simplex with total mass `u >= 1`.
    Eg { u: f64 },
}

impl Multiplicative {
    pub fn total_mass(self) -> Option<f64> {
        match self {
            Multiplicative::Egu => None,
            Multiplicative::Eg { u } => Some(u),
        }
    }

    pub(crate) fn validate(self) -> Result<()> {
        match self {
            Multiplicative::Eg { u } if !(u.is_finite() && u >= 1.0) => {
                Err(Error::invalid("u must be >= 1"))
            }
            _ => Ok(()),
        }
    }
}

/// Exact exponential step or its first-order expansion `exp(z) ~ 1 + z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UpdateForm {
    #[default]
    Exact,
    Linearized,
}

/// Result of one combiner step.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureStep<S> {
    pub prediction: f64,
    pub error: f64,
    pub next: S,
    /// At least one exponent argument hit [`EXPONENT_LIMIT`].
    pub saturated: bool,
}

/// Common interface of every combiner.
pub trait Mixture: Clone {
    /// Number of constituent outputs combined.
    fn constituents(&self) -> usize;

    fn predict(&self, x: &[f64]) -> Result<f64>;

    fn step(&self, x: &[f64], y: f64) -> Result<MixtureStep<Self>>;

    /// Internal parameter vector: the augmented vector for multiplicative
    /// combiners, the free weights for LMS.
    fn state(&self) -> &[f64];

    /// Length-`m` weights applied to the constituent outputs.
    fn effective_weights(&self) -> Vec<f64>;
}

/// The six combiners, by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    AffineEgu,
    AffineEg,
    AffineLms,
    UnconstrainedEgu,
    UnconstrainedEg,
    UnconstrainedLms,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::AffineEgu,
        Algorithm::AffineEg,
        Algorithm::AffineLms,
        Algorithm::UnconstrainedEgu,
        Algorithm::UnconstrainedEg,
        Algorithm::UnconstrainedLms,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::AffineEgu => "affine_egu",
            Algorithm::AffineEg => "affine_eg",
            Algorithm::AffineLms => "affine_lms",
            Algorithm::UnconstrainedEgu => "unconstrained_egu",
            Algorithm::UnconstrainedEg => "unconstrained_eg",
            Algorithm::UnconstrainedLms => "unconstrained_lms",
        }
    }

    pub fn is_affine(self) -> bool {
        matches!(
            self,
            Algorithm::AffineEgu | Algorithm::AffineEg | Algorithm::AffineLms
        )
    }

    pub fn is_eg(self) -> bool {
        matches!(self, Algorithm::AffineEg | Algorithm::UnconstrainedEg)
    }

    pub fn is_lms(self) -> bool {
        matches!(self, Algorithm::AffineLms | Algorithm::UnconstrainedLms)
    }

    pub fn is_multiplicative(self) -> bool {
        !self.is_lms()
    }

    /// Dimension of [`Mixture::state`] for `m` constituents.
    pub fn state_dim(self, m: usize) -> usize {
        let base = if self.is_affine() { m - 1 } else { m };
        if self.is_lms() {
            base
        } else {
            2 * base
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::invalid(alloc::format!("unknown algorithm `{s}`")))
    }
}

/// Combiner regressor and target for one step.
///
/// Affine: `g = [x_i - x_m]_{i<m}` and target `y - x_m`. Unconstrained:
/// `g = x` and target `y`. In both cases `e = target - w_free^T g`.
pub fn combiner_regressor(affine: bool, x: &[f64], y: f64) -> (Vec<f64>, f64) {
    if affine {
        let xm = x[x.len() - 1];
        (x[..x.len() - 1].iter().map(|xi| xi - xm).collect(), y - xm)
    } else {
        (x.to_vec(), y)
    }
}

/// Multiplies `aug = [z1; z2]` by `exp(+mu_e g)` / `exp(-mu_e g)` (or the
/// linearized factors) and, for EG, rescales to total mass `u`.
///
/// Returns the new vector and whether any exponent was clamped.
pub fn exponentiated_update(
    aug: &[f64],
    g: &[f64],
    mu_e: f64,
    form: UpdateForm,
    kind: Multiplicative,
) -> Result<(Vec<f64>, bool)> {
    let k = g.len();
    debug_assert_eq!(aug.len(), 2 * k);
    let mut saturated = false;
    let exponents: Vec<f64> = (0..2 * k)
        .map(|i| {
            let z = if i < k { mu_e * g[i] } else { -mu_e * g[i - k] };
            if z.is_nan() {
                z
            } else if z.abs() > EXPONENT_LIMIT {
                saturated = true;
                z.clamp(-EXPONENT_LIMIT, EXPONENT_LIMIT)
            } else {
                z
            }
        })
        .collect();

    let mut next: Vec<f64> = match form {
        UpdateForm::Exact => {
            // EG is invariant to a common factor, so shift by the largest
            // exponent to keep the products finite.
            let shift = match kind {
                Multiplicative::Egu => 0.0,
                Multiplicative::Eg { .. } => {
                    exponents.iter().copied().fold(f64::NEG_INFINITY, f64::max)
                }
            };
            aug.iter()
                .zip(&exponents)
                .map(|(a, z)| a * libm::exp(z - shift))
                .collect()
        }
        UpdateForm::Linearized => aug
            .iter()
            .zip(&exponents)
            .map(|(a, z)| a * (1.0 + z))
            .collect(),
    };

    if let Multiplicative::Eg { u } = kind {
        let total: f64 = next.iter().sum();
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::Divergence);
        }
        for v in &mut next {
            *v = u * *v / total;
        }
    }

    if next.iter().all(|v| v.is_finite() && *v > 0.0) {
        Ok((next, saturated))
    } else {
        Err(Error::Divergence)
    }
}

fn check_weights_positive(aug: &[f64]) -> Result<()> {
    if aug.iter().all(|v| v.is_finite() && *v > 0.0) {
        Ok(())
    } else {
        Err(Error::invalid(
            "augmented weights must be finite and strictly positive",
        ))
    }
}

fn check_mass(aug: &[f64], kind: Multiplicative) -> Result<()> {
    if let Multiplicative::Eg { u } = kind {
        let total: f64 = aug.iter().sum();
        if (total - u).abs() > 1e-12 * u {
            return Err(Error::invalid("augmented weights must sum to u"));
        }
    }
    Ok(())
}

fn check_mu(mu: f64) -> Result<()> {
    if mu.is_finite() && mu >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(
            "mixture step size must be finite and nonnegative",
        ))
    }
}

/// Any of the six combiners behind one type.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyMixture {
    Affine(AffineMixture),
    Unconstrained(UnconstrainedMixture),
    AffineLms(AffineLms),
    UnconstrainedLms(UnconstrainedLms),
}

impl AnyMixture {
    /// Combiner started from uniform effective weights `1/m`.
    ///
    /// `u` is required for the EG variants and ignored otherwise.
    pub fn uniform(
        algorithm: Algorithm,
        m: usize,
        mu: f64,
        u: Option<f64>,
        form: UpdateForm,
    ) -> Result<Self> {
        let eg = || {
            u.map(|u| Multiplicative::Eg { u })
                .ok_or_else(|| Error::invalid("EG combiners need u"))
        };
        Ok(match algorithm {
            Algorithm::AffineEgu => AnyMixture::Affine(
                AffineMixture::uniform(m, mu, Multiplicative::Egu)?.with_form(form),
            ),
            Algorithm::AffineEg => {
                AnyMixture::Affine(AffineMixture::uniform(m, mu, eg()?)?.with_form(form))
            }
            Algorithm::UnconstrainedEgu => AnyMixture::Unconstrained(
                UnconstrainedMixture::uniform(m, mu, Multiplicative::Egu)?.with_form(form),
            ),
            Algorithm::UnconstrainedEg => AnyMixture::Unconstrained(
                UnconstrainedMixture::uniform(m, mu, eg()?)?.with_form(form),
            ),
            Algorithm::AffineLms => AnyMixture::AffineLms(AffineLms::uniform(m, mu)?),
            Algorithm::UnconstrainedLms => {
                AnyMixture::UnconstrainedLms(UnconstrainedLms::uniform(m, mu)?)
            }
        })
    }

    pub fn algorithm(&self) -> Algorithm {
        match self {
            AnyMixture::Affine(s) => match s.kind() {
                Multiplicative::Egu => Algorithm::AffineEgu,
                Multiplicative::Eg { .. } => Algorithm::AffineEg,
            },
            AnyMixture::Unconstrained(s) => match s.kind() {
                Multiplicative::Egu => Algorithm::UnconstrainedEgu,
                Multiplicative::Eg { .. } => Algorithm::UnconstrainedEg,
            },
            AnyMixture::AffineLms(_) => Algorithm::AffineLms,
            AnyMixture::UnconstrainedLms(_) => Algorithm::UnconstrainedLms,
        }
    }

    pub fn mu(&self) -> f64 {
        match self {
            AnyMixture::Affine(s) => s.mu(),
            AnyMixture::Unconstrained(s) => s.mu(),
            AnyMixture::AffineLms(s) => s.mu(),
            AnyMixture::UnconstrainedLms(s) => s.mu(),
        }
    }

    pub fn kind(&self) -> Option<Multiplicative> {
        match self {
            AnyMixture::Affine(s) => Some(s.kind()),
            AnyMixture::Unconstrained(s) => Some(s.kind()),
            _ => None,
        }
    }
}

impl Mixture for AnyMixture {
    fn constituents(&self) -> usize {
        match self {
            AnyMixture::Affine(s) => s.constituents(),
            AnyMixture::Unconstrained(s) => s.constituents(),
            AnyMixture::AffineLms(s) => s.constituents(),
            AnyMixture::UnconstrainedLms(s) => s.constituents(),
        }
    }

    fn predict(&self, x: &[f64]) -> Result<f64> {
        match self {
            AnyMixture::Affine(s) => s.predict(x),
            AnyMixture::Unconstrained(s) => s.predict(x),
            AnyMixture::AffineLms(s) => s.predict(x),
            AnyMixture::UnconstrainedLms(s) => s.predict(x),
        }
    }

    fn step(&self, x: &[f64], y: f64) -> Result<MixtureStep<Self>> {
        fn wrap<S>(s: MixtureStep<S>, f: impl FnOnce(S) -> AnyMixture) -> MixtureStep<AnyMixture> {
            MixtureStep {
                prediction: s.prediction,
                error: s.error,
                next: f(s.next),
                saturated: s.saturated,
            }
        }
        Ok(match self {
            AnyMixture::Affine(s) => wrap(s.step(x, y)?, AnyMixture::Affine),
            AnyMixture::Unconstrained(s) => wrap(s.step(x, y)?, AnyMixture::Unconstrained),
            AnyMixture::AffineLms(s) => wrap(s.step(x, y)?, AnyMixture::AffineLms),
            AnyMixture::UnconstrainedLms(s) => wrap(s.step(x, y)?, AnyMixture::UnconstrainedLms),
        })
    }

    fn state(&self) -> &[f64] {
        match self {
            AnyMixture::Affine(s) => s.state(),
            AnyMixture::Unconstrained(s) => s.state(),
            AnyMixture::AffineLms(s) => s.state(),
            AnyMixture::UnconstrainedLms(s) => s.state(),
        }
    }

    fn effective_weights(&self) -> Vec<f64> {
        match self {
            AnyMixture::Affine(s) => s.effective_weights(),
            AnyMixture::Unconstrained(s) => s.effective_weights(),
            AnyMixture::AffineLms(s) => s.effective_weights(),
            AnyMixture::UnconstrainedLms(s) => s.effective_weights(),
        }
    }
}
