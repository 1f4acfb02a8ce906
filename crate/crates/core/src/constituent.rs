//! First-stage bank of LMS filters sharing one regressor.

use alloc::vec::Vec;

use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LmsFilter {
    weights: Vec<f64>,
    mu: f64,
}

impl LmsFilter {
    /// Zero-initialized filter of the given order.
    pub fn new(order: usize, mu: f64) -> Result<Self> {
        Self::with_weights(alloc::vec![0.0; order], mu)
    }

    pub fn with_weights(weights: Vec<f64>, mu: f64) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::invalid("LMS filter order must be positive"));
        }
        if !(mu.is_finite() && mu > 0.0) {
            return Err(Error::invalid("LMS step size must be positive"));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::invalid("LMS weights must be finite"));
        }
        Ok(Self { weights, mu })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn predict(&self, a: &[f64]) -> f64 {
        dot(&self.weights, a)
    }

    /// `w <- w + mu (y - w^T a) a`.
    pub fn adapt(&mut self, a: &[f64], y: f64) -> Result<()> {
        let e = y - self.predict(a);
        self.adapt_with_error(a, e)
    }

    fn adapt_with_error(&mut self, a: &[f64], e: f64) -> Result<()> {
        let g = self.mu * e;
        for (w, x) in self.weights.iter_mut().zip(a) {
            *w += g * x;
        }
        if self.weights.iter().all(|w| w.is_finite()) {
            Ok(())
        } else {
            Err(Error::Divergence)
        }
    }
}

/// `m >= 2` LMS filters running in parallel; their outputs form the mixture
/// regressor `x(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    filters: Vec<LmsFilter>,
}

impl FilterBank {
    pub fn new(filters: Vec<LmsFilter>) -> Result<Self> {
        if filters.len() < 2 {
            return Err(Error::invalid("a filter bank needs at least two filters"));
        }
        let order = filters[0].weights.len();
        for f in &filters {
            check_len(order, f.weights.len())?;
        }
        Ok(Self { filters })
    }

    /// Zero-initialized bank with one filter per step size.
    pub fn zeros(order: usize, step_sizes: &[f64]) -> Result<Self> {
        let filters = step_sizes
            .iter()
            .map(|&mu| LmsFilter::new(order, mu))
            .collect::<Result<Vec<_>>>()?;
        Self::new(filters)
    }

    pub fn len(&self) -> usize {
        self.filters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.filters.is_empty()
    }

    pub fn order(&self) -> usize {
        self.filters[0].weights.len()
    }

    pub fn filters(&self) -> &[LmsFilter] {
        &self.filters
    }

    /// Outputs `x = [w_i^T a]` of every filter.
    pub fn predict(&self, a: &[f64]) -> Result<Vec<f64>> {
        check_len(self.order(), a.len())?;
        Ok(self.filters.iter().map(|f| f.predict(a)).collect())
    }

    /// Adapts every filter on `(a, y)`.
    pub fn adapt(&mut self, a: &[f64], y: f64) -> Result<()> {
        self.predict_and_adapt(a, y).map(|_| ())
    }

    /// Returns the pre-update outputs and then adapts every filter.
    pub fn predict_and_adapt(&mut self, a: &[f64], y: f64) -> Result<Vec<f64>> {
        let x = self.predict(a)?;
        for (f, xi) in self.filters.iter_mut().zip(&x) {
            f.adapt_with_error(a, y - xi)?;
        }
        Ok(x)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
