//! Ensemble estimates of the regressor statistics that drive the transient
//! recursions.
//!
//! For a combiner with regressor `g(t)` (`delta(t)` affine, `x(t)`
//! unconstrained) and target `s(t)` (`y - x_m` affine, `y` unconstrained),
//! the augmented regressor is `u(t) = [g; -g]` and
//!
//! * `gamma(t) = E[u(t) s(t)]`,
//! * `Gamma(t) = E[u(t) u(t)^T]`,
//! * `d(t) = E[s(t)^2]`.
//!
//! All sums run in ascending run order, so results do not depend on how runs
//! were scheduled.

use alloc::vec::Vec;

use crate::error::{check_len, Error, Result};
use crate::{Matrix, Vector};

/// `gamma(t)`, `Gamma(t)` and `d(t)` at one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentEstimates {
    /// `gamma(t) = E[u s]`.
    pub gamma: Vector,
    /// `Gamma(t) = E[u u^T]`.
    pub correlation: Matrix,
    /// `d(t) = E[s^2]`.
    pub target_power: f64,
}

impl MomentEstimates {
    pub fn dim(&self) -> usize {
        self.gamma.len()
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            gamma: Vector::zeros(dim),
            correlation: Matrix::zeros(dim, dim),
            target_power: 0.0,
        }
    }

    /// Checks dimensions and that `Gamma` is symmetric to `1e-8`.
    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        check_len(n, self.correlation.nrows())?;
        check_len(n, self.correlation.ncols())?;
        let scale = self.correlation.amax().max(1.0);
        for i in 0..n {
            for j in 0..i {
                if (self.correlation[(i, j)] - self.correlation[(j, i)]).abs() > 1e-8 * scale {
                    return Err(Error::invalid("Gamma must be symmetric"));
                }
            }
        }
        Ok(())
    }

    /// Diagonal matrix of `Gamma`'s diagonal, i.e. `E[diag^2(u)]`.
    pub fn squared_regressor_diag(&self) -> Matrix {
        Matrix::from_diagonal(&self.correlation.diagonal())
    }
}

/// Second-order statistics in the non-augmented regressor space.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseMoments {
    /// `R(t) = E[g g^T]`.
    pub r: Matrix,
    /// `p(t) = E[g s]`.
    pub p: Vector,
    /// `E[s^2]`.
    pub target_power: f64,
}

impl BaseMoments {
    /// Lifts to `u = [g; -g]`: `gamma = [p; -p]`, `Gamma = [[R, -R], [-R, R]]`.
    pub fn augment(&self) -> MomentEstimates {
        let k = self.p.len();
        let mut gamma = Vector::zeros(2 * k);
        let mut corr = Matrix::zeros(2 * k, 2 * k);
        for i in 0..k {
            gamma[i] = self.p[i];
            gamma[i + k] = -self.p[i];
            for j in 0..k {
                let r = self.r[(i, j)];
                corr[(i, j)] = r;
                corr[(i + k, j + k)] = r;
                corr[(i, j + k)] = -r;
                corr[(i + k, j)] = -r;
            }
        }
        MomentEstimates {
            gamma,
            correlation: corr,
            target_power: self.target_power,
        }
    }
}

/// One augmented regressor/target observation from one run.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSample {
    pub u: Vec<f64>,
    pub target: f64,
}

/// Per-time ensemble means over `runs[r][t]`.
pub fn estimate_moments(runs: &[Vec<MomentSample>]) -> Result<Vec<MomentEstimates>> {
    let first = runs.first().ok_or(Error::EmptyEnsemble)?;
    let horizon = first.len();
    if runs.iter().any(|r| r.len() != horizon) {
        return Err(Error::RaggedEnsemble);
    }
    let n = runs.len() as f64;
    (0..horizon)
        .map(|t| {
            let dim = first[t].u.len();
            let mut est = MomentEstimates::zeros(dim);
            for run in runs {
                let s = &run[t];
                check_len(dim, s.u.len())?;
                for i in 0..dim {
                    est.gamma[i] += s.u[i] * s.target;
                    for j in 0..dim {
                        est.correlation[(i, j)] += s.u[i] * s.u[j];
                    }
                }
                est.target_power += s.target * s.target;
            }
            est.gamma /= n;
            est.correlation /= n;
            est.target_power /= n;
            Ok(est)
        })
        .collect()
}

/// Streaming accumulator of [`BaseMoments`] over runs, one slot per time step.
///
/// Runs must be added in ascending run order for reproducible sums.
#[derive(Debug, Clone)]
pub struct BaseMomentAccumulator {
    dim: usize,
    horizon: usize,
    runs: usize,
    // packed upper triangle of sum g g^T per t
    outer: Vec<f64>,
    cross: Vec<f64>,
    power: Vec<f64>,
}

impl BaseMomentAccumulator {
    pub fn new(dim: usize, horizon: usize) -> Self {
        let tri = dim * (dim + 1) / 2;
        Self {
            dim,
            horizon,
            runs: 0,
            outer: alloc::vec![0.0; tri * horizon],
            cross: alloc::vec![0.0; dim * horizon],
            power: alloc::vec![0.0; horizon],
        }
    }

    pub fn runs(&self) -> usize {
        self.runs
    }

    /// Adds one run given row-major regressors (`horizon x dim`) and targets.
    pub fn add_run(&mut self, regressors: &[f64], targets: &[f64]) -> Result<()> {
        check_len(self.horizon, targets.len())?;
        check_len(self.horizon * self.dim, regressors.len())?;
        let k = self.dim;
        let tri = k * (k + 1) / 2;
        for t in 0..self.horizon {
            let g = &regressors[t * k..(t + 1) * k];
            let s = targets[t];
            let outer = &mut self.outer[t * tri..(t + 1) * tri];
            let mut idx = 0;
            for i in 0..k {
                for j in i..k {
                    outer[idx] += g[i] * g[j];
                    idx += 1;
                }
            }
            for (c, gi) in self.cross[t * k..(t + 1) * k].iter_mut().zip(g) {
                *c += gi * s;
            }
            self.power[t] += s * s;
        }
        self.runs += 1;
        Ok(())
    }

    /// Ensemble means at time `t`.
    pub fn moments_at(&self, t: usize) -> Result<BaseMoments> {
        if self.runs == 0 {
            return Err(Error::EmptyEnsemble);
        }
        let n = self.runs as f64;
        let k = self.dim;
        let tri = k * (k + 1) / 2;
        let outer = &self.outer[t * tri..(t + 1) * tri];
        let mut r = Matrix::zeros(k, k);
        let mut idx = 0;
        for i in 0..k {
            for j in i..k {
                let v = outer[idx] / n;
                r[(i, j)] = v;
                r[(j, i)] = v;
                idx += 1;
            }
        }
        let p = Vector::from_iterator(k, self.cross[t * k..(t + 1) * k].iter().map(|v| v / n));
        Ok(BaseMoments {
            r,
            p,
            target_power: self.power[t] / n,
        })
    }

    pub fn finish(&self) -> Result<Vec<BaseMoments>> {
        (0..self.horizon).map(|t| self.moments_at(t)).collect()
    }
}
