//! JSON experiment configuration.
//!
//! Unknown keys are rejected. Semantic checks report every violation with the
//! dotted path of the offending field.

use std::fmt;
use std::path::{Path, PathBuf};

use bregmix_core::rng::{stream, StreamRole};
use bregmix_core::signal::{tau_for_snr_db, REFERENCE_SYSTEM};
use bregmix_core::{Algorithm, SignalModelConfig};
use rand::Rng;
use serde::{Deserialize, Serialize};

pub const DEFAULT_RUNS: usize = 200;
pub const DEFAULT_HORIZON: usize = 20_000;
pub const DEFAULT_DECIMATION: usize = 10;
pub const DEFAULT_NOISE_VARIANCE: f64 = 0.3;
/// Default second-moment entries (1-based) written to `weights_moment.csv`.
pub const DEFAULT_MOMENT_ENTRIES: [[usize; 2]; 4] = [[1, 1], [1, 2], [2, 3], [3, 4]];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    pub signal: SignalSection,
    pub constituents: Vec<ConstituentSpec>,
    pub mixture: MixtureSection,
    #[serde(default)]
    pub theory: TheorySection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filter_order: Option<usize>,
    #[serde(default = "default_w_o")]
    pub w_o: Vec<f64>,
    #[serde(default = "default_noise_variance")]
    pub noise_variance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snr_db: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstituentSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_range: Option<[f64; 2]>,
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureSection {
    pub algorithm: String,
    pub mu: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u: Option<f64>,
    #[serde(default)]
    pub use_linearized: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheorySection {
    #[serde(default)]
    pub enabled: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub moment_runs: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_directory")]
    pub directory: PathBuf,
    #[serde(default = "default_decimation")]
    pub decimation: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub moment_entries: Option<Vec<[usize; 2]>>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            directory: default_directory(),
            decimation: DEFAULT_DECIMATION,
            moment_entries: None,
        }
    }
}

fn default_runs() -> usize {
    DEFAULT_RUNS
}
fn default_horizon() -> usize {
    DEFAULT_HORIZON
}
fn default_w_o() -> Vec<f64> {
    REFERENCE_SYSTEM.to_vec()
}
fn default_noise_variance() -> f64 {
    DEFAULT_NOISE_VARIANCE
}
fn default_directory() -> PathBuf {
    PathBuf::from("out")
}
fn default_decimation() -> usize {
    DEFAULT_DECIMATION
}
fn one() -> usize {
    1
}
fn is_one(v: &usize) -> bool {
    *v == 1
}

/// One schema violation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

/// Every violation found in a config.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigErrors(pub Vec<Violation>);

impl ConfigErrors {
    fn single(path: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigErrors(vec![Violation {
            path: path.into(),
            message: message.into(),
        }])
    }
}

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigErrors> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let path = if path == "." {
                "<root>".to_string()
            } else {
                path
            };
            ConfigErrors::single(path, e.inner().to_string())
        })
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigErrors> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigErrors::single(path.display().to_string(), e.to_string()))?;
        Self::from_json(&text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Number of constituent filters after expanding `count`.
    pub fn constituent_count(&self) -> usize {
        self.constituents.iter().map(|c| c.count).sum()
    }

    pub fn algorithm(&self) -> Option<Algorithm> {
        self.mixture.algorithm.parse().ok()
    }

    /// Checks every semantic constraint, collecting all violations.
    pub fn validate(&self) -> Result<(), ConfigErrors> {
        let mut errs = Vec::new();
        let mut bad = |path: String, message: &str| {
            errs.push(Violation {
                path,
                message: message.to_string(),
            })
        };

        if self.runs < 1 {
            bad("runs".into(), "must be >= 1");
        }
        if self.horizon < 1 {
            bad("horizon".into(), "must be >= 1");
        }

        let s = &self.signal;
        if s.w_o.is_empty() {
            bad("signal.w_o".into(), "must not be empty");
        }
        if s.w_o.iter().any(|w| !w.is_finite()) {
            bad("signal.w_o".into(), "entries must be finite");
        }
        if let Some(order) = s.filter_order {
            if order != s.w_o.len() {
                bad(
                    "signal.filter_order".into(),
                    "must equal the length of signal.w_o",
                );
            }
        }
        if !(s.noise_variance.is_finite() && s.noise_variance >= 0.0) {
            bad("signal.noise_variance".into(), "must be >= 0");
        }
        match (s.tau, s.snr_db) {
            (Some(_), Some(_)) => bad("signal".into(), "give exactly one of tau and snr_db"),
            (None, None) => bad("signal".into(), "one of tau and snr_db is required"),
            (Some(tau), None) if !(tau.is_finite() && tau > 0.0) => {
                bad("signal.tau".into(), "must be > 0")
            }
            (None, Some(snr)) => {
                if !snr.is_finite() {
                    bad("signal.snr_db".into(), "must be finite");
                } else if s.noise_variance <= 0.0 {
                    bad("signal.snr_db".into(), "needs a positive noise_variance");
                } else if s.w_o.iter().all(|w| *w == 0.0) {
                    bad("signal.snr_db".into(), "needs a nonzero w_o");
                }
            }
            _ => {}
        }

        for (i, c) in self.constituents.iter().enumerate() {
            let p = format!("constituents[{i}]");
            if c.count < 1 {
                bad(format!("{p}.count"), "must be >= 1");
            }
            match (c.mu, c.mu_range) {
                (Some(_), Some(_)) => bad(p.clone(), "give exactly one of mu and mu_range"),
                (None, None) => bad(p.clone(), "one of mu and mu_range is required"),
                (Some(mu), None) if !(mu.is_finite() && mu > 0.0) => {
                    bad(format!("{p}.mu"), "must be > 0")
                }
                (None, Some([lo, hi]))
                    if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi) =>
                {
                    bad(format!("{p}.mu_range"), "must satisfy 0 < low <= high")
                }
                _ => {}
            }
        }
        let m = self.constituent_count();
        if m < 2 {
            bad(
                "constituents".into(),
                "need at least two constituent filters",
            );
        }

        let algorithm = self.algorithm();
        match algorithm {
            None => bad(
                "mixture.algorithm".into(),
                "must be one of affine_egu, affine_eg, affine_lms, unconstrained_egu, unconstrained_eg, unconstrained_lms",
            ),
            Some(a) => {
                match (a.is_eg(), self.mixture.u) {
                    (true, None) => bad("mixture.u".into(), "required for EG algorithms"),
                    (true, Some(u)) if !(u.is_finite() && u >= 1.0) => bad("mixture.u".into(), "u must be ≥ 1"),
                    (false, Some(_)) => bad("mixture.u".into(), "only valid for EG algorithms"),
                    _ => {}
                }
                if self.mixture.use_linearized && a.is_lms() {
                    bad("mixture.use_linearized".into(), "only valid for multiplicative algorithms");
                }
                if self.theory.enabled && a.is_lms() {
                    bad("theory.enabled".into(), "theory recursions need an EGU or EG algorithm");
                }
                if let (Some(entries), true) = (&self.output.moment_entries, m >= 2) {
                    let dim = a.state_dim(m);
                    for (k, [i, j]) in entries.iter().enumerate() {
                        if *i < 1 || *j < 1 || *i > dim || *j > dim {
                            bad(format!("output.moment_entries[{k}]"), "indices must be within 1..=state dimension");
                        }
                    }
                }
            }
        }
        if !(self.mixture.mu.is_finite() && self.mixture.mu >= 0.0) {
            bad("mixture.mu".into(), "must be >= 0");
        }
        if self.theory.moment_runs == Some(0) {
            bad("theory.moment_runs".into(), "must be >= 1");
        }
        if self.theory.moment_runs.is_some() && !self.theory.enabled {
            bad(
                "theory.moment_runs".into(),
                "only valid with theory.enabled",
            );
        }
        if self.output.decimation < 1 {
            bad("output.decimation".into(), "must be >= 1");
        }

        if errs.is_empty() {
            Ok(())
        } else {
            Err(ConfigErrors(errs))
        }
    }

    /// Validates, fills every default and draws the constituent step sizes.
    pub fn resolve(&self) -> Result<ResolvedConfig, ConfigErrors> {
        self.validate()?;
        let algorithm = self.algorithm().expect("validated");
        let s = &self.signal;
        let tau = match (s.tau, s.snr_db) {
            (Some(tau), None) => tau,
            (None, Some(snr)) => tau_for_snr_db(&s.w_o, snr, s.noise_variance)
                .map_err(|e| ConfigErrors::single("signal.snr_db", e.to_string()))?,
            _ => unreachable!("validated"),
        };
        let signal = SignalModelConfig::new(s.w_o.clone(), tau, s.noise_variance)
            .map_err(|e| ConfigErrors::single("signal", e.to_string()))?;

        let mut rng = stream(self.seed, 0, StreamRole::ConstituentStepSize);
        let mut step_sizes = Vec::with_capacity(self.constituent_count());
        for c in &self.constituents {
            for _ in 0..c.count {
                step_sizes.push(match (c.mu, c.mu_range) {
                    (Some(mu), None) => mu,
                    (None, Some([lo, hi])) if lo == hi => lo,
                    (None, Some([lo, hi])) => rng.random_range(lo..=hi),
                    _ => unreachable!("validated"),
                });
            }
        }
        let dim = algorithm.state_dim(step_sizes.len());
        let moment_entries = self.output.moment_entries.clone().unwrap_or_else(|| {
            DEFAULT_MOMENT_ENTRIES
                .iter()
                .copied()
                .filter(|[i, j]| *i <= dim && *j <= dim)
                .collect()
        });

        Ok(ResolvedConfig {
            config: self.clone(),
            algorithm,
            signal,
            step_sizes,
            moment_entries: moment_entries
                .into_iter()
                .map(|[i, j]| (i - 1, j - 1))
                .collect(),
        })
    }

    /// Config with every default written out, ranges left symbolic.
    pub fn with_defaults(&self) -> ExperimentConfig {
        let mut c = self.clone();
        if c.signal.filter_order.is_none() {
            c.signal.filter_order = Some(c.signal.w_o.len());
        }
        if c.output.moment_entries.is_none() {
            if let Some(a) = c.algorithm() {
                let m = c.constituent_count();
                if m >= 2 {
                    let dim = a.state_dim(m);
                    c.output.moment_entries = Some(
                        DEFAULT_MOMENT_ENTRIES
                            .iter()
                            .copied()
                            .filter(|[i, j]| *i <= dim && *j <= dim)
                            .collect(),
                    );
                }
            }
        }
        c
    }
}

/// A validated config with every random or derived quantity fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedConfig {
    pub config: ExperimentConfig,
    pub algorithm: Algorithm,
    pub signal: SignalModelConfig,
    /// One LMS step size per constituent, in order.
    pub step_sizes: Vec<f64>,
    /// Zero-based `(i, j)` second-moment entries to report.
    pub moment_entries: Vec<(usize, usize)>,
}

impl ResolvedConfig {
    pub fn constituents(&self) -> usize {
        self.step_sizes.len()
    }

    pub fn state_dim(&self) -> usize {
        self.algorithm.state_dim(self.constituents())
    }

    /// Config that reproduces this one exactly: step sizes and `tau` fixed.
    pub fn echo(&self) -> ExperimentConfig {
        let mut c = self.config.with_defaults();
        c.signal.tau = Some(self.signal.tau());
        c.signal.snr_db = None;
        c.constituents = self
            .step_sizes
            .iter()
            .map(|&mu| ConstituentSpec {
                mu: Some(mu),
                mu_range: None,
                count: 1,
            })
            .collect();
        c
    }
}
