use alloc::vec::Vec;

use super::affine::affine_weights;
use super::{check_mu, combiner_regressor, Mixture, MixtureStep};
use crate::constituent::dot;
use crate::error::{check_len, Error, Result};

fn check_free(w: &[f64], min_len: usize) -> Result<()> {
    if w.len() < min_len {
        return Err(Error::invalid("a mixture needs at least two constituents"));
    }
    if w.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::invalid("mixture weights must be finite"))
    }
}

fn lms_update(w: &[f64], g: &[f64], mu_e: f64) -> Result<Vec<f64>> {
    let next: Vec<f64> = w.iter().zip(g).map(|(w, g)| w + mu_e * g).collect();
    if next.iter().all(|v| v.is_finite()) {
        Ok(next)
    } else {
        Err(Error::Divergence)
    }
}

/// Affine LMS baseline: `lambda <- lambda + mu e delta`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineLms {
    lambda: Vec<f64>,
    mu: f64,
}

impl AffineLms {
    pub fn new(lambda: Vec<f64>, mu: f64) -> Result<Self> {
        check_free(&lambda, 1)?;
        check_mu(mu)?;
        Ok(Self { lambda, mu })
    }

    pub fn uniform(m: usize, mu: f64) -> Result<Self> {
        if m < 2 {
            return Err(Error::invalid("a mixture needs at least two constituents"));
        }
        Self::new(alloc::vec![1.0 / m as f64; m - 1], mu)
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }
}

impl Mixture for AffineLms {
    fn constituents(&self) -> usize {
        self.lambda.len() + 1
    }

    fn predict(&self, x: &[f64]) -> Result<f64> {
        check_len(self.constituents(), x.len())?;
        Ok(dot(&self.effective_weights(), x))
    }

    fn step(&self, x: &[f64], y: f64) -> Result<MixtureStep<Self>> {
        check_len(self.constituents(), x.len())?;
        let (delta, target) = combiner_regressor(true, x, y);
        let e = target - dot(&self.lambda, &delta);
        let lambda = lms_update(&self.lambda, &delta, self.mu * e)?;
        Ok(MixtureStep {
            prediction: y - e,
            error: e,
            next: Self {
                lambda,
                mu: self.mu,
            },
            saturated: false,
        })
    }

    fn state(&self) -> &[f64] {
        &self.lambda
    }

    fn effective_weights(&self) -> Vec<f64> {
        affine_weights(&self.lambda)
    }
}

/// Unconstrained LMS baseline: `w <- w + mu e x`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnconstrainedLms {
    w: Vec<f64>,
    mu: f64,
}

impl UnconstrainedLms {
    pub fn new(w: Vec<f64>, mu: f64) -> Result<Self> {
        check_free(&w, 2)?;
        check_mu(mu)?;
        Ok(Self { w, mu })
    }

    pub fn uniform(m: usize, mu: f64) -> Result<Self> {
        Self::new(alloc::vec![1.0 / m as f64; m], mu)
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }
}

impl Mixture for UnconstrainedLms {
    fn constituents(&self) -> usize {
        self.w.len()
    }

    fn predict(&self, x: &[f64]) -> Result<f64> {
        check_len(self.constituents(), x.len())?;
        Ok(dot(&self.w, x))
    }

    fn step(&self, x: &[f64], y: f64) -> Result<MixtureStep<Self>> {
        let prediction = self.predict(x)?;
        let e = y - prediction;
        let w = lms_update(&self.w, x, self.mu * e)?;
        Ok(MixtureStep {
            prediction,
            error: e,
            next: Self { w, mu: self.mu },
            saturated: false,
        })
    }

    fn state(&self) -> &[f64] {
        &self.w
    }

    fn effective_weights(&self) -> Vec<f64> {
        self.w.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn unconstrained_one_step() {
        let s = UnconstrainedLms::new(vec![0.0, 0.0], 1.0).unwrap();
        let step = s.step(&[1.0, 2.0], 1.0).unwrap();
        assert_eq!(step.error, 1.0);
        assert_eq!(step.next.state(), &[1.0, 2.0]);
    }

    #[test]
    fn zero_error_fixed_points() {
        let s = UnconstrainedLms::new(vec![0.5, 0.25], 0.7).unwrap();
        let step = s.step(&[2.0, 4.0], 2.0).unwrap();
        assert_eq!(step.next, s);

        let a = AffineLms::new(vec![0.5], 0.7).unwrap();
        // w = [0.5, 0.5] -> prediction 1.5
        let step = a.step(&[1.0, 2.0], 1.5).unwrap();
        assert_eq!(step.error, 0.0);
        assert_eq!(step.next, a);
    }

    #[test]
    fn affine_replay_matches_scalar_oracle() {
        let xs = [
            [0.3, -1.2, 0.8],
            [1.1, 0.4, -0.5],
            [-0.7, 0.9, 0.2],
            [0.05, -0.3, 1.4],
            [0.6, 0.6, -1.0],
            [-1.5, 0.2, 0.1],
            [0.9, -0.8, 0.7],
            [0.0, 1.0, -0.2],
            [0.4, 0.3, 0.2],
            [-0.2, -0.6, 0.9],
        ];
        let ys = [0.1, -0.4, 0.8, 0.3, -1.1, 0.6, 0.2, -0.3, 0.9, 0.5];
        let mu = 0.2;
        let mut s = AffineLms::uniform(3, mu).unwrap();
        let (mut l0, mut l1) = (1.0 / 3.0, 1.0 / 3.0);
        for (x, y) in xs.iter().zip(ys) {
            let d0 = x[0] - x[2];
            let d1 = x[1] - x[2];
            let e = (y - x[2]) - l0 * d0 - l1 * d1;
            l0 += mu * e * d0;
            l1 += mu * e * d1;
            s = s.step(x, y).unwrap().next;
        }
        assert!((s.state()[0] - l0).abs() < 1e-14);
        assert!((s.state()[1] - l1).abs() < 1e-14);
        let w = s.effective_weights();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn divergence() {
        let s = UnconstrainedLms::new(vec![0.0, 0.0], 1e308).unwrap();
        assert_eq!(s.step(&[1e10, 1e10], 1e10), Err(Error::Divergence));
    }
}
