//! Mean and second-moment recursions of the multiplicative combiners.
//!
//! The recursions act on the augmented weight vector `z_a` (the state of an
//! [`AffineMixture`](crate::AffineMixture) or
//! [`UnconstrainedMixture`](crate::UnconstrainedMixture)) and are driven by
//! the ensemble statistics in [`MomentEstimates`]. With `q = E[z_a]`,
//! `Q = E[z_a z_a^T]`, `C = Q - q q^T` and `D = E[diag^2(u)]`:
//!
//! ```text
//! q' = q + mu diag(gamma) q - mu diag(Q Gamma)
//! Q' = (I + mu diag(gamma) - mu diag(Gamma q)) Q - mu D C 1 q^T - mu diag(q) Gamma C
//!      + Q (mu diag(gamma) - mu diag(Gamma q)) - mu q 1^T C D - mu C Gamma diag(q)
//! ```
//!
//! EG divides the mean by the expected normalizer and the second moment by
//! `b`, then scales by `u` and `u^2` respectively. Every variant shares
//! `E[e^2] = d - 2 q^T gamma + tr(Q Gamma)`.

use crate::error::{check_len, Error, Result};
use crate::mixture::Multiplicative;
use crate::moments::MomentEstimates;
use crate::{Matrix, Vector};

/// Denominators smaller than this in magnitude are rejected.
pub const DEGENERATE_DENOMINATOR: f64 = 1e-12;

/// Largest condition number [`optimum_weights`] accepts.
pub const MAX_CONDITION: f64 = 1e12;

/// `q_a(t)` and `Q_a(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoreticalMoments {
    pub mean: Vector,
    pub second: Matrix,
}

impl TheoreticalMoments {
    /// Moments of a deterministic state: `q = z`, `Q = z z^T`.
    pub fn deterministic(state: &[f64]) -> Self {
        let mean = Vector::from_column_slice(state);
        let second = &mean * mean.transpose();
        Self { mean, second }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Diagonal of `Q - q q^T`.
    pub fn variances(&self) -> Vector {
        Vector::from_iterator(
            self.dim(),
            (0..self.dim()).map(|i| self.second[(i, i)] - self.mean[i] * self.mean[i]),
        )
    }

    fn check(&self, m: &MomentEstimates) -> Result<()> {
        let n = self.dim();
        check_len(n, self.second.nrows())?;
        check_len(n, self.second.ncols())?;
        check_len(n, m.dim())?;
        m.validate()
    }
}

/// The recursion for one combiner family and step size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransientModel {
    pub mu: f64,
    pub kind: Multiplicative,
}

impl TransientModel {
    pub fn new(mu: f64, kind: Multiplicative) -> Self {
        Self { mu, kind }
    }

    /// Advances `(q_a, Q_a)` by one time step.
    pub fn step(
        &self,
        cur: &TheoreticalMoments,
        m: &MomentEstimates,
    ) -> Result<TheoreticalMoments> {
        match self.kind {
            Multiplicative::Egu => {
                let (mean, second) = egu_moment_step(&cur.mean, &cur.second, m, self.mu)?;
                Ok(TheoreticalMoments { mean, second })
            }
            Multiplicative::Eg { u } => Ok(TheoreticalMoments {
                mean: eg_mean_step(&cur.mean, &cur.second, m, self.mu, u)?,
                second: eg_second_moment_step(&cur.mean, &cur.second, m, self.mu, u)?,
            }),
        }
    }

    pub fn mse(&self, cur: &TheoreticalMoments, m: &MomentEstimates) -> f64 {
        mse_evolution(&cur.mean, &cur.second, m)
    }
}

/// `q + mu diag(gamma) q - mu diag(Q Gamma)`.
pub fn mean_rhs(q: &Vector, big_q: &Matrix, m: &MomentEstimates, mu: f64) -> Vector {
    let qg = big_q * &m.correlation;
    Vector::from_iterator(
        q.len(),
        (0..q.len()).map(|i| q[i] + mu * m.gamma[i] * q[i] - mu * qg[(i, i)]),
    )
}

/// The right-hand side of the EGU second-moment recursion, symmetrized.
pub fn second_moment_rhs(q: &Vector, big_q: &Matrix, m: &MomentEstimates, mu: f64) -> Matrix {
    let n = q.len();
    let gamma = &m.gamma;
    let corr = &m.correlation;
    let d2 = m.squared_regressor_diag();
    let cov = big_q - q * q.transpose();
    let ones = Vector::from_element(n, 1.0);

    let gq = corr * q;
    let drift = Matrix::from_diagonal(&Vector::from_iterator(n, (0..n).map(|i| gamma[i] - gq[i])));
    let diag_q = Matrix::from_diagonal(q);

    let mut a = big_q + mu * (&drift * big_q) + mu * (big_q * &drift);
    a -= mu * (&d2 * &cov * &ones * q.transpose());
    a -= mu * (&diag_q * corr * &cov);
    a -= mu * (q * ones.transpose() * &cov * &d2);
    a -= mu * (&cov * corr * &diag_q);
    symmetrize(a)
}

/// One EGU step of `(q_a, Q_a)`.
pub fn egu_moment_step(
    q: &Vector,
    big_q: &Matrix,
    m: &MomentEstimates,
    mu: f64,
) -> Result<(Vector, Matrix)> {
    TheoreticalMoments {
        mean: q.clone(),
        second: big_q.clone(),
    }
    .check(m)?;
    Ok((
        mean_rhs(q, big_q, m, mu),
        second_moment_rhs(q, big_q, m, mu),
    ))
}

/// Expected EG normalizer `(1 + mu gamma)^T q - mu tr(Q Gamma)`.
pub fn eg_mean_denominator(q: &Vector, big_q: &Matrix, m: &MomentEstimates, mu: f64) -> f64 {
    q.sum() + mu * m.gamma.dot(q) - mu * (big_q * &m.correlation).trace()
}

/// EG mean step with the expectation of the quotient replaced by the
/// quotient of expectations.
pub fn eg_mean_step(
    q: &Vector,
    big_q: &Matrix,
    m: &MomentEstimates,
    mu: f64,
    u: f64,
) -> Result<Vector> {
    TheoreticalMoments {
        mean: q.clone(),
        second: big_q.clone(),
    }
    .check(m)?;
    let den = eg_mean_denominator(q, big_q, m, mu);
    if !(den.abs() >= DEGENERATE_DENOMINATOR) {
        return Err(Error::DegenerateQuotient(den));
    }
    Ok(mean_rhs(q, big_q, m, mu) * (u / den))
}

/// Scalar `b(t)` of the EG second-moment step, written in augmented space
/// (`p -> gamma`, `R q -> Gamma q`).
pub fn eg_normalizer(q: &Vector, big_q: &Matrix, m: &MomentEstimates, mu: f64) -> f64 {
    let n = q.len();
    let ones = Vector::from_element(n, 1.0);
    let gamma = &m.gamma;
    let corr = &m.correlation;
    let d2 = m.squared_regressor_diag();
    let cov = big_q - q * q.transpose();
    let q_ones = big_q * &ones;
    let cov_ones = &cov * &ones;
    let gq = corr * q;
    let mass = q.sum();

    ones.dot(&q_ones) + mu * gamma.dot(&q_ones)
        - mu * gq.dot(&q_ones)
        - mu * cov_ones.dot(&gq)
        - mu * (d2.diagonal().dot(&cov_ones)) * mass
        + mu * q_ones.dot(gamma)
        - mu * q_ones.dot(&gq)
        - mu * gq.dot(&cov_ones)
        - mu * mass * d2.diagonal().dot(&cov_ones)
}

/// `u^2 A / b` with `A` the EGU second-moment right-hand side.
pub fn eg_second_moment_step(
    q: &Vector,
    big_q: &Matrix,
    m: &MomentEstimates,
    mu: f64,
    u: f64,
) -> Result<Matrix> {
    TheoreticalMoments {
        mean: q.clone(),
        second: big_q.clone(),
    }
    .check(m)?;
    let b = eg_normalizer(q, big_q, m, mu);
    if !(b.abs() >= DEGENERATE_DENOMINATOR) {
        return Err(Error::DegenerateQuotient(b));
    }
    Ok(second_moment_rhs(q, big_q, m, mu) * (u * u / b))
}

/// `E[e^2] = d - 2 q^T gamma + tr(Q Gamma)`.
pub fn mse_evolution(q: &Vector, big_q: &Matrix, m: &MomentEstimates) -> f64 {
    m.target_power - 2.0 * q.dot(&m.gamma) + (big_q * &m.correlation).trace()
}

/// Wiener solution `w0 = R^{-1} p` in the combiner regressor space.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimumSolution {
    pub r: Matrix,
    pub p: Vector,
    pub w0: Vector,
    pub condition_number: f64,
}

pub fn optimum_weights(r: &Matrix, p: &Vector) -> Result<OptimumSolution> {
    let n = p.len();
    check_len(n, r.nrows())?;
    check_len(n, r.ncols())?;
    let sv = r.clone().singular_values();
    let (lo, hi) = (sv.min(), sv.max());
    let cond = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(cond <= MAX_CONDITION) {
        return Err(Error::IllConditioned(cond));
    }
    let w0 = r.clone().lu().solve(p).ok_or(Error::IllConditioned(cond))?;
    Ok(OptimumSolution {
        r: r.clone(),
        p: p.clone(),
        w0,
        condition_number: cond,
    })
}

/// Spectral radius of `I - mu diag(s) R` with `s_i = q_i + q_{i+k}` (the
/// expected `z1 + z2`). Mean convergence is predicted when this is below one.
pub fn convergence_condition(q_a: &Vector, base_r: &Matrix, mu: f64) -> Result<f64> {
    let k = base_r.nrows();
    check_len(k, base_r.ncols())?;
    check_len(2 * k, q_a.len())?;
    let s = Vector::from_iterator(k, (0..k).map(|i| q_a[i] + q_a[i + k]));
    let m = Matrix::identity(k, k) - mu * Matrix::from_diagonal(&s) * base_r;
    Ok(m.complex_eigenvalues()
        .iter()
        .map(|z| libm::hypot(z.re, z.im))
        .fold(0.0, f64::max))
}

fn symmetrize(a: Matrix) -> Matrix {
    (&a + a.transpose()) * 0.5
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, StreamRole};
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn moments(gamma: &[f64], corr: &[f64], d: f64) -> MomentEstimates {
        let n = gamma.len();
        MomentEstimates {
            gamma: Vector::from_column_slice(gamma),
            correlation: Matrix::from_row_slice(n, n, corr),
            target_power: d,
        }
    }

    fn sample_state(n: usize, seed: u64) -> (Vector, Matrix, MomentEstimates) {
        let mut rng = stream(seed, 0, StreamRole::Regressor);
        let mut z = || -> f64 { rng.sample(StandardNormal) };
        let q = Vector::from_iterator(n, (0..n).map(|_| 0.5 + z().abs()));
        let l = Matrix::from_fn(n, n, |_, _| 0.2 * z());
        let big_q = &q * q.transpose() + &l * l.transpose();
        let g = Matrix::from_fn(n, n, |_, _| z());
        let corr = &g * g.transpose() / n as f64;
        let gamma = Vector::from_iterator(n, (0..n).map(|_| z()));
        (
            q,
            big_q,
            MomentEstimates {
                gamma,
                correlation: corr,
                target_power: 1.7,
            },
        )
    }

    #[test]
    fn no_excitation_is_a_fixed_point() {
        let (q, big_q, _) = sample_state(4, 1);
        let zero = MomentEstimates::zeros(4);
        let (q1, q2) = egu_moment_step(&q, &big_q, &zero, 0.3).unwrap();
        assert_relative_eq!(q1, q.clone(), epsilon = 1e-15);
        assert_relative_eq!(q2, big_q.clone(), epsilon = 1e-14);
    }

    #[test]
    fn zero_step_size_is_a_fixed_point() {
        let (q, big_q, m) = sample_state(4, 2);
        let (q1, q2) = egu_moment_step(&q, &big_q, &m, 0.0).unwrap();
        assert_eq!(q1, q);
        assert_relative_eq!(q2, big_q.clone(), epsilon = 1e-15);
    }

    #[test]
    fn eg_zero_step_renormalizes() {
        let (q, big_q, m) = sample_state(4, 3);
        let u = q.sum();
        let q1 = eg_mean_step(&q, &big_q, &m, 0.0, u).unwrap();
        assert_relative_eq!(q1, q.clone(), max_relative = 1e-14);
        let q1 = eg_mean_step(&q, &big_q, &m, 0.0, u / 2.0).unwrap();
        assert_relative_eq!(q1, q.clone() / 2.0, max_relative = 1e-14);

        let mass2 = big_q.sum();
        let q2 = eg_second_moment_step(&q, &big_q, &m, 0.0, 2.5).unwrap();
        assert_relative_eq!(q2, big_q.clone() * (6.25 / mass2), max_relative = 1e-13);
        let q2 = eg_second_moment_step(&q, &big_q, &m, 0.0, mass2.sqrt()).unwrap();
        assert_relative_eq!(q2, big_q.clone(), max_relative = 1e-13);
    }

    #[test]
    fn two_dimensional_hand_expansion() {
        // Term-by-term evaluation with scalar arithmetic.
        let (q0, q1) = (0.8, 0.3);
        let (a00, a01, a11) = (0.7, 0.2, 0.15);
        let (g0, g1) = (0.4, -0.4);
        let (c00, c01, c11) = (0.9, -0.9, 0.9);
        let mu = 0.05;
        let m = moments(&[g0, g1], &[c00, c01, c01, c11], 1.3);
        let q = Vector::from_column_slice(&[q0, q1]);
        let big_q = Matrix::from_row_slice(2, 2, &[a00, a01, a01, a11]);

        let qg00 = a00 * c00 + a01 * c01;
        let qg11 = a01 * c01 + a11 * c11;
        let mean0 = q0 + mu * g0 * q0 - mu * qg00;
        let mean1 = q1 + mu * g1 * q1 - mu * qg11;

        let qa = [[a00, a01], [a01, a11]];
        let qv = [q0, q1];
        let cv = [[c00, c01], [c01, c11]];
        let gv = [g0, g1];
        let gq = [c00 * q0 + c01 * q1, c01 * q0 + c11 * q1];
        let cov = |i: usize, j: usize| qa[i][j] - qv[i] * qv[j];
        let row_cov = |i: usize| cov(i, 0) + cov(i, 1);
        let mut a = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                let mut v = qa[i][j];
                v += mu * (gv[i] - gq[i]) * qa[i][j];
                v += mu * qa[i][j] * (gv[j] - gq[j]);
                v -= mu * cv[i][i] * row_cov(i) * qv[j];
                v -= mu * qv[i] * (cv[i][0] * cov(0, j) + cv[i][1] * cov(1, j));
                v -= mu * qv[i] * row_cov(j) * cv[j][j];
                v -= mu * (cov(i, 0) * cv[0][j] + cov(i, 1) * cv[1][j]) * qv[j];
                a[i][j] = v;
            }
        }
        let (m1, m2) = egu_moment_step(&q, &big_q, &m, mu).unwrap();
        assert_relative_eq!(m1[0], mean0, epsilon = 1e-15);
        assert_relative_eq!(m1[1], mean1, epsilon = 1e-15);
        for i in 0..2 {
            for j in 0..2 {
                let sym = 0.5 * (a[i][j] + a[j][i]);
                assert_relative_eq!(m2[(i, j)], sym, epsilon = 1e-14);
            }
        }

        // EG replay
        let u = 1.6;
        let den = q0 + q1 + mu * (g0 * q0 + g1 * q1) - mu * (qg00 + qg11);
        let eg = eg_mean_step(&q, &big_q, &m, mu, u).unwrap();
        assert_relative_eq!(eg[0], u * mean0 / den, epsilon = 1e-14);
        assert_relative_eq!(eg[1], u * mean1 / den, epsilon = 1e-14);
        let b = eg_normalizer(&q, &big_q, &m, mu);
        let eg2 = eg_second_moment_step(&q, &big_q, &m, mu, u).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let sym = 0.5 * (a[i][j] + a[j][i]);
                assert_relative_eq!(eg2[(i, j)], u * u * sym / b, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn eg_normalizer_is_total_mass_of_second_moment_rhs() {
        for seed in 0..20 {
            let (q, big_q, m) = sample_state(2 + (seed as usize % 5) * 2, seed);
            let a = second_moment_rhs(&q, &big_q, &m, 0.03);
            let b = eg_normalizer(&q, &big_q, &m, 0.03);
            assert_relative_eq!(b, a.sum(), max_relative = 1e-12);
        }
    }

    #[test]
    fn eg_mean_keeps_mass_u() {
        let (q, big_q, m) = sample_state(6, 9);
        let q1 = eg_mean_step(&q, &big_q, &m, 0.02, 7.0).unwrap();
        assert_relative_eq!(q1.sum(), 7.0, max_relative = 1e-13);
        let q2 = eg_second_moment_step(&q, &big_q, &m, 0.02, 7.0).unwrap();
        assert_relative_eq!(q2.sum(), 49.0, max_relative = 1e-12);
    }

    #[test]
    fn degenerate_denominators() {
        let q = Vector::from_column_slice(&[0.0, 0.0]);
        let big_q = Matrix::zeros(2, 2);
        let m = MomentEstimates::zeros(2);
        assert!(matches!(
            eg_mean_step(&q, &big_q, &m, 0.1, 1.0),
            Err(Error::DegenerateQuotient(_))
        ));
        assert!(matches!(
            eg_second_moment_step(&q, &big_q, &m, 0.1, 1.0),
            Err(Error::DegenerateQuotient(_))
        ));
    }

    #[test]
    fn dimension_mismatch() {
        let (q, big_q, _) = sample_state(4, 4);
        assert!(egu_moment_step(&q, &big_q, &MomentEstimates::zeros(2), 0.1).is_err());
    }

    #[test]
    fn mse_of_empty_combiner_is_target_power() {
        let (_, _, m) = sample_state(4, 5);
        assert_eq!(
            mse_evolution(&Vector::zeros(4), &Matrix::zeros(4, 4), &m),
            m.target_power
        );
    }

    #[test]
    fn mse_of_deterministic_trajectory() {
        // one observation: u = [g; -g], target s
        let g = [0.7, -1.2];
        let s = 0.4;
        let z = [0.9, 0.3, 0.2, 0.5];
        let u = [g[0], g[1], -g[0], -g[1]];
        let mut corr = [0.0; 16];
        for i in 0..4 {
            for j in 0..4 {
                corr[i * 4 + j] = u[i] * u[j];
            }
        }
        let m = moments(&u.map(|v| v * s), &corr, s * s);
        let det = TheoreticalMoments::deterministic(&z);
        let e = s - ((z[0] - z[2]) * g[0] + (z[1] - z[3]) * g[1]);
        assert_relative_eq!(
            mse_evolution(&det.mean, &det.second, &m),
            e * e,
            epsilon = 1e-14
        );
    }

    #[test]
    fn optimum_weights_examples() {
        let p = Vector::from_column_slice(&[0.3, -0.7]);
        let sol = optimum_weights(&Matrix::identity(2, 2), &p).unwrap();
        assert_eq!(sol.w0, p);
        let sol = optimum_weights(
            &Matrix::from_diagonal(&Vector::from_column_slice(&[2.0, 4.0])),
            &Vector::from_column_slice(&[2.0, 2.0]),
        )
        .unwrap();
        assert_relative_eq!(
            sol.w0,
            Vector::from_column_slice(&[1.0, 0.5]),
            epsilon = 1e-15
        );
        let singular = Matrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(
            optimum_weights(&singular, &p),
            Err(Error::IllConditioned(_))
        ));
    }

    #[test]
    fn optimum_weights_residual_on_random_spd() {
        for seed in 0..20 {
            let (_, _, m) = sample_state(5, 100 + seed);
            let r = &m.correlation + Matrix::identity(5, 5) * 0.1;
            let sol = optimum_weights(&r, &m.gamma).unwrap();
            let residual = (&r * &sol.w0 - &m.gamma).norm();
            assert!(
                residual <= 1e-10 * m.gamma.norm().max(1.0),
                "residual {residual}"
            );
        }
    }

    #[test]
    fn convergence_condition_examples() {
        let q = Vector::from_column_slice(&[0.6, 0.3, 0.4, 0.7]);
        let r = Matrix::identity(2, 2);
        assert_eq!(convergence_condition(&q, &r, 0.0).unwrap(), 1.0);
        assert_relative_eq!(
            convergence_condition(&q, &r, 0.5).unwrap(),
            0.5,
            epsilon = 1e-14
        );
    }

    fn power_iteration(m: &Matrix) -> f64 {
        let mut v = Vector::from_element(m.nrows(), 1.0).normalize();
        let mut lambda = 0.0;
        for _ in 0..20_000 {
            let w = m * &v;
            lambda = w.norm();
            v = w / lambda;
        }
        lambda
    }

    #[test]
    fn convergence_condition_matches_power_iteration() {
        for seed in 0..10 {
            let (q, _, m) = sample_state(6, 200 + seed);
            let r = m.correlation.view((0, 0), (3, 3)).into_owned() + Matrix::identity(3, 3) * 0.2;
            // large enough mu that the dominant eigenvalue is 1 - mu s lambda_max < -1 + ..., unique in modulus
            let mu = 1.5 / (r.norm() * q.amax() * 2.0);
            let s = Vector::from_iterator(3, (0..3).map(|i| q[i] + q[i + 3]));
            let mat = Matrix::identity(3, 3) - mu * Matrix::from_diagonal(&s) * &r;
            let radius = convergence_condition(&q, &r, mu).unwrap();
            assert_relative_eq!(radius, power_iteration(&mat), max_relative = 1e-6);
        }
    }
}
