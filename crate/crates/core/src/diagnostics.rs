//! Checks on the two approximations behind the transient recursions.

/// Normalized squared gap between `exp(z)` and `1 + z`:
/// `(exp(z) - (1 + z))^2 / sqrt(exp(z)^2 (1 + z)^2)`.
///
/// `z` is the exponent of the first augmented coordinate, `mu e g_1`.
pub fn linearization_diagnostic(z: f64) -> f64 {
    let exact = libm::exp(z);
    let linear = 1.0 + z;
    let diff = exact - linear;
    let denom = libm::sqrt(exact * exact * linear * linear);
    if diff == 0.0 {
        0.0
    } else {
        diff * diff / denom
    }
}

/// Pieces of the linearized EG update `u [(I + mu e diag(u)) z]_1 / [(1 + mu e u)^T z]`
/// for one run, in the order (numerator of coordinate 1, denominator).
pub fn eg_quotient_parts(aug: &[f64], g: &[f64], mu_e: f64, u: f64) -> (f64, f64) {
    let k = g.len();
    let numerator = u * aug[0] * (1.0 + mu_e * g[0]);
    let denominator: f64 = (0..k)
        .map(|i| aug[i] * (1.0 + mu_e * g[i]) + aug[i + k] * (1.0 - mu_e * g[i]))
        .sum();
    (numerator, denominator)
}

/// Normalized squared gap between `E[N/D]` and `E[N]/E[D]` for the first
/// coordinate, from ensemble means of the quotient, numerator and
/// denominator. `None` when the mean denominator is degenerate.
pub fn quotient_diagnostic(
    mean_quotient: f64,
    mean_numerator: f64,
    mean_denominator: f64,
) -> Option<f64> {
    if !(mean_denominator.abs() >= crate::transient::DEGENERATE_DENOMINATOR) {
        return None;
    }
    let separated = mean_numerator / mean_denominator;
    let diff = mean_quotient - separated;
    if diff == 0.0 {
        return Some(0.0);
    }
    Some(diff * diff / libm::sqrt(mean_quotient * mean_quotient * separated * separated))
}

/// Ensemble accumulator for [`quotient_diagnostic`] at one time step.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct QuotientAccumulator {
    quotient: f64,
    numerator: f64,
    denominator: f64,
    runs: usize,
}

impl QuotientAccumulator {
    pub fn add(&mut self, numerator: f64, denominator: f64) {
        self.quotient += numerator / denominator;
        self.numerator += numerator;
        self.denominator += denominator;
        self.runs += 1;
    }

    pub fn merge(&mut self, other: &Self) {
        self.quotient += other.quotient;
        self.numerator += other.numerator;
        self.denominator += other.denominator;
        self.runs += other.runs;
    }

    pub fn runs(&self) -> usize {
        self.runs
    }

    pub fn diagnostic(&self) -> Option<f64> {
        if self.runs == 0 {
            return None;
        }
        let n = self.runs as f64;
        quotient_diagnostic(self.quotient / n, self.numerator / n, self.denominator / n)
    }
}
