//! Synthetic system-identification data: `y(t) = tau * w_o^T a(t) + n(t)`.
//!
//! `a(t)` is i.i.d. zero-mean unit-variance Gaussian and `n(t)` is i.i.d.
//! Gaussian with variance `noise_variance`. The SNR is
//! `10 log10(tau^2 |w_o|^2 / noise_variance)`.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{check_len, Error, Result};

/// The seventh-order system used throughout the reference experiments.
pub const REFERENCE_SYSTEM: [f64; 7] = [0.25, -0.47, -0.37, 0.045, -0.18, 0.78, 0.147];

/// Validated parameters of the data model.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalModelConfig {
    w_o: Vec<f64>,
    tau: f64,
    noise_variance: f64,
}

impl SignalModelConfig {
    pub fn new(w_o: Vec<f64>, tau: f64, noise_variance: f64) -> Result<Self> {
        if w_o.is_empty() {
            return Err(Error::invalid("w_o must have at least one tap"));
        }
        if w_o.iter().any(|w| !w.is_finite()) {
            return Err(Error::invalid("w_o entries must be finite"));
        }
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::invalid("tau must be positive"));
        }
        if !(noise_variance.is_finite() && noise_variance >= 0.0) {
            return Err(Error::invalid("noise_variance must be nonnegative"));
        }
        Ok(Self {
            w_o,
            tau,
            noise_variance,
        })
    }

    /// Builds the model with `tau` solved so the SNR equals `snr_db`.
    pub fn with_snr_db(w_o: Vec<f64>, snr_db: f64, noise_variance: f64) -> Result<Self> {
        let tau = tau_for_snr_db(&w_o, snr_db, noise_variance)?;
        Self::new(w_o, tau, noise_variance)
    }

    pub fn filter_order(&self) -> usize {
        self.w_o.len()
    }

    pub fn w_o(&self) -> &[f64] {
        &self.w_o
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    /// Power of the noiseless component, `tau^2 |w_o|^2`.
    pub fn signal_power(&self) -> f64 {
        self.tau * self.tau * norm_sq(&self.w_o)
    }

    pub fn snr_db(&self) -> Result<f64> {
        if self.noise_variance == 0.0 {
            return Err(Error::InfiniteSnr);
        }
        Ok(10.0 * libm::log10(self.signal_power() / self.noise_variance))
    }
}

/// Scaling `tau` for which `w_o` under `noise_variance` has the given SNR.
pub fn tau_for_snr_db(w_o: &[f64], snr_db: f64, noise_variance: f64) -> Result<f64> {
    if !(noise_variance.is_finite() && noise_variance > 0.0) {
        return Err(Error::InfiniteSnr);
    }
    let energy = norm_sq(w_o);
    if !(energy > 0.0) || !snr_db.is_finite() {
        return Err(Error::invalid(
            "SNR target needs a nonzero w_o and a finite dB value",
        ));
    }
    Ok(libm::sqrt(
        noise_variance * libm::pow(10.0, snr_db / 10.0) / energy,
    ))
}

fn norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// One regressor/desired-signal pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub a: Vec<f64>,
    pub y: f64,
}

/// Sample generator for a fixed [`SignalModelConfig`].
#[derive(Debug, Clone)]
pub struct SignalModel {
    config: SignalModelConfig,
    noise_std: f64,
}

impl SignalModel {
    pub fn new(config: SignalModelConfig) -> Self {
        let noise_std = libm::sqrt(config.noise_variance);
        Self { config, noise_std }
    }

    pub fn config(&self) -> &SignalModelConfig {
        &self.config
    }

    /// Draws the next sample. Regressor and noise come from separate streams
    /// so either can be held fixed while the other varies.
    pub fn next_sample<R1: Rng + ?Sized, R2: Rng + ?Sized>(
        &self,
        regressors: &mut R1,
        noise: &mut R2,
    ) -> Sample {
        let a: Vec<f64> = (0..self.config.filter_order())
            .map(|_| regressors.sample::<f64, _>(StandardNormal))
            .collect();
        let n = if self.noise_std > 0.0 {
            self.noise_std * noise.sample::<f64, _>(StandardNormal)
        } else {
            0.0
        };
        self.observe_unchecked(a, n)
    }

    /// Desired signal for a given regressor and noise draw.
    pub fn observe(&self, a: Vec<f64>, noise: f64) -> Result<Sample> {
        check_len(self.config.filter_order(), a.len())?;
        Ok(self.observe_unchecked(a, noise))
    }

    fn observe_unchecked(&self, a: Vec<f64>, noise: f64) -> Sample {
        let clean: f64 = self.config.w_o.iter().zip(&a).map(|(w, x)| w * x).sum();
        let y = self.config.tau * clean + noise;
        Sample { a, y }
    }
}
