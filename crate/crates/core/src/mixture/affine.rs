use alloc::vec::Vec;

use super::{
    check_mass, check_mu, check_weights_positive, combiner_regressor, exponentiated_update,
    Mixture, MixtureStep, Multiplicative, UpdateForm,
};
use crate::constituent::dot;
use crate::error::{check_len, Error, Result};

/// Affinely constrained combiner: `w_i = lambda1_i - lambda2_i` for `i < m`
/// and `w_m = 1 - sum_{i<m} w_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMixture {
    aug: Vec<f64>,
    mu: f64,
    kind: Multiplicative,
    form: UpdateForm,
}

impl AffineMixture {
    pub fn new(
        lambda1: Vec<f64>,
        lambda2: Vec<f64>,
        mu: f64,
        kind: Multiplicative,
    ) -> Result<Self> {
        check_len(lambda1.len(), lambda2.len())?;
        if lambda1.is_empty() {
            return Err(Error::invalid(
                "an affine mixture needs at least two constituents",
            ));
        }
        let mut aug = lambda1;
        aug.extend_from_slice(&lambda2);
        Self::from_augmented(aug, mu, kind)
    }

    /// From the augmented vector `[lambda1; lambda2]`.
    pub fn from_augmented(aug: Vec<f64>, mu: f64, kind: Multiplicative) -> Result<Self> {
        if aug.len() < 2 || !aug.len().is_multiple_of(2) {
            return Err(Error::invalid(
                "augmented affine state must have even length >= 2",
            ));
        }
        check_mu(mu)?;
        kind.validate()?;
        check_weights_positive(&aug)?;
        check_mass(&aug, kind)?;
        Ok(Self {
            aug,
            mu,
            kind,
            form: UpdateForm::Exact,
        })
    }

    /// Start with every effective weight equal to `1/m`.
    ///
    /// EGU: `lambda1 = 1/m + b`, `lambda2 = b` with `b = (m-1)/(2m)`, so each
    /// pair starts with `lambda1 + lambda2 = 1` and the first EGU steps have
    /// the size of an LMS step.
    /// EG: `lambda1 = u/(2(m-1)) + 1/(2m)`, `lambda2 = u/(2(m-1)) - 1/(2m)`,
    /// so the augmented mass is exactly `u`.
    pub fn uniform(m: usize, mu: f64, kind: Multiplicative) -> Result<Self> {
        if m < 2 {
            return Err(Error::invalid(
                "an affine mixture needs at least two constituents",
            ));
        }
        kind.validate()?;
        let k = m - 1;
        let half = 1.0 / (2.0 * m as f64);
        let (l1, l2) = match kind {
            Multiplicative::Egu => {
                let b = k as f64 * half;
                (1.0 / m as f64 + b, b)
            }
            Multiplicative::Eg { u } => {
                let c = u / (2.0 * k as f64);
                (c + half, c - half)
            }
        };
        let mut aug = alloc::vec![l1; k];
        aug.extend(core::iter::repeat_n(l2, k));
        if let Multiplicative::Eg { u } = kind {
            // exact total mass despite rounding in l1, l2
            let total: f64 = aug.iter().sum();
            for v in &mut aug {
                *v = u * *v / total;
            }
        }
        Self::from_augmented(aug, mu, kind)
    }

    pub fn with_form(mut self, form: UpdateForm) -> Self {
        self.form = form;
        self
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn kind(&self) -> Multiplicative {
        self.kind
    }

    pub fn form(&self) -> UpdateForm {
        self.form
    }

    fn free_dim(&self) -> usize {
        self.aug.len() / 2
    }

    pub fn lambda1(&self) -> &[f64] {
        &self.aug[..self.free_dim()]
    }

    pub fn lambda2(&self) -> &[f64] {
        &self.aug[self.free_dim()..]
    }

    /// `lambda = lambda1 - lambda2`, the `m - 1` free weights.
    pub fn lambda(&self) -> Vec<f64> {
        self.lambda1()
            .iter()
            .zip(self.lambda2())
            .map(|(a, b)| a - b)
            .collect()
    }

    /// Returns `delta = [x_i - x_m]` and `e = (y - x_m) - lambda^T delta`.
    pub fn error(&self, x: &[f64], y: f64) -> Result<(Vec<f64>, f64)> {
        check_len(self.constituents(), x.len())?;
        let (delta, target) = combiner_regressor(true, x, y);
        let e = target - dot(&self.lambda(), &delta);
        Ok((delta, e))
    }

    pub fn step_with(&self, x: &[f64], y: f64, form: UpdateForm) -> Result<MixtureStep<Self>> {
        let (delta, e) = self.error(x, y)?;
        let (aug, saturated) =
            exponentiated_update(&self.aug, &delta, self.mu * e, form, self.kind)?;
        Ok(MixtureStep {
            prediction: y - e,
            error: e,
            next: Self {
                aug,
                ..self.clone()
            },
            saturated,
        })
    }

    pub fn step_exact(&self, x: &[f64], y: f64) -> Result<MixtureStep<Self>> {
        self.step_with(x, y, UpdateForm::Exact)
    }

    pub fn step_linearized(&self, x: &[f64], y: f64) -> Result<MixtureStep<Self>> {
        self.step_with(x, y, UpdateForm::Linearized)
    }
}

impl Mixture for AffineMixture {
    fn constituents(&self) -> usize {
        self.free_dim() + 1
    }

    fn predict(&self, x: &[f64]) -> Result<f64> {
        check_len(self.constituents(), x.len())?;
        Ok(dot(&self.effective_weights(), x))
    }

    fn step(&self, x: &[f64], y: f64) -> Result<MixtureStep<Self>> {
        self.step_with(x, y, self.form)
    }

    fn state(&self) -> &[f64] {
        &self.aug
    }

    fn effective_weights(&self) -> Vec<f64> {
        affine_weights(&self.lambda())
    }
}

/// `[lambda; 1 - sum(lambda)]`.
pub(crate) fn affine_weights(lambda: &[f64]) -> Vec<f64> {
    let mut w = lambda.to_vec();
    w.push(1.0 - lambda.iter().sum::<f64>());
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn egu(l1: Vec<f64>, l2: Vec<f64>, mu: f64) -> AffineMixture {
        AffineMixture::new(l1, l2, mu, Multiplicative::Egu).unwrap()
    }

    #[test]
    fn effective_weights_by_hand() {
        assert_eq!(
            egu(vec![0.75], vec![0.25], 0.1).effective_weights(),
            vec![0.5, 0.5]
        );
        assert_eq!(
            egu(vec![0.3, 0.2, 0.9], vec![0.3, 0.2, 0.9], 0.1).effective_weights(),
            vec![0.0, 0.0, 0.0, 1.0]
        );
    }

    #[test]
    fn error_by_hand() {
        let s = egu(vec![0.6], vec![0.1], 0.1);
        let (delta, e) = s.error(&[1.0, 0.5], 1.0).unwrap();
        assert_eq!(delta, vec![0.5]);
        assert_relative_eq!(e, 0.25, epsilon = 1e-15);

        let s = egu(vec![0.2, 0.4], vec![0.1, 0.1], 0.1);
        let (delta, e) = s.error(&[2.0, 2.0, 2.0], 3.0).unwrap();
        assert_eq!(delta, vec![0.0, 0.0]);
        assert_eq!(e, 1.0);
    }

    #[test]
    fn egu_step_by_hand() {
        let s = egu(vec![0.6], vec![0.1], 0.1);
        let step = s.step(&[1.0, 0.5], 1.0).unwrap();
        assert_relative_eq!(step.error, 0.25, epsilon = 1e-15);
        assert_relative_eq!(step.prediction, 0.75, epsilon = 1e-15);
        // 0.6 e^{0.0125}, 0.1 e^{-0.0125}
        assert_relative_eq!(
            step.next.lambda1()[0],
            0.607_547_070_924_380_6,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            step.next.lambda2()[0],
            0.098_757_780_049_388_14,
            max_relative = 1e-14
        );
    }

    #[test]
    fn egu_zero_error_is_a_fixed_point() {
        let s = egu(vec![0.6], vec![0.1], 0.1);
        // prediction = 0.5*1 + 0.5*0.5 = 0.75
        let step = s.step(&[1.0, 0.5], 0.75).unwrap();
        assert_eq!(step.error, 0.0);
        assert_eq!(step.next, s);
    }

    #[test]
    fn eg_pure_renormalization() {
        let s = AffineMixture::from_augmented(vec![0.5; 4], 0.0, Multiplicative::Eg { u: 2.0 })
            .unwrap();
        let step = s.step(&[1.0, -2.0, 0.3], 0.7).unwrap();
        assert_eq!(step.next.state(), &[0.5; 4]);
        // a state off the simplex is rejected
        assert!(
            AffineMixture::from_augmented(vec![1.0; 4], 0.0, Multiplicative::Eg { u: 2.0 })
                .is_err()
        );
    }

    #[test]
    fn eg_step_is_egu_step_rescaled() {
        let u = 1.4;
        let aug = vec![0.6 * u / 0.7, 0.1 * u / 0.7];
        let eg = AffineMixture::from_augmented(aug.clone(), 0.1, Multiplicative::Eg { u }).unwrap();
        let egu = AffineMixture::from_augmented(aug, 0.1, Multiplicative::Egu).unwrap();
        let x = [1.0, 0.5];
        let a = eg.step(&x, 1.0).unwrap();
        let b = egu.step(&x, 1.0).unwrap();
        assert_eq!(a.error, b.error);
        let total: f64 = b.next.state().iter().sum();
        for (got, raw) in a.next.state().iter().zip(b.next.state()) {
            assert_relative_eq!(*got, u * raw / total, max_relative = 1e-14);
        }
    }

    #[test]
    fn rejects_invalid_states() {
        assert!(AffineMixture::new(vec![0.1], vec![0.0], 0.1, Multiplicative::Egu).is_err());
        assert!(AffineMixture::new(vec![], vec![], 0.1, Multiplicative::Egu).is_err());
        assert!(AffineMixture::new(vec![0.1], vec![0.1, 0.2], 0.1, Multiplicative::Egu).is_err());
        assert!(AffineMixture::uniform(3, 0.1, Multiplicative::Eg { u: 0.5 }).is_err());
        assert!(AffineMixture::uniform(1, 0.1, Multiplicative::Egu).is_err());
        let s = egu(vec![0.6], vec![0.1], 0.1);
        assert!(s.step(&[1.0], 0.0).is_err());
    }

    #[test]
    fn uniform_egu_pairs_have_unit_mass() {
        let s = AffineMixture::uniform(4, 0.01, Multiplicative::Egu).unwrap();
        assert_eq!(s.lambda1(), &[0.625; 3]);
        assert_eq!(s.lambda2(), &[0.375; 3]);
        assert_eq!(s.effective_weights(), vec![0.25; 4]);
    }

    #[test]
    fn uniform_eg_has_mass_u() {
        for m in 2..12 {
            for u in [1.0, 3.0, 500.0] {
                let s = AffineMixture::uniform(m, 0.01, Multiplicative::Eg { u }).unwrap();
                assert_relative_eq!(s.state().iter().sum::<f64>(), u, max_relative = 1e-12);
                for w in s.effective_weights() {
                    assert_relative_eq!(w, 1.0 / m as f64, epsilon = 1e-12);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn delta_form_error_matches_direct_error(
            l1 in proptest::collection::vec(0.01f64..3.0, 1..6),
            l2seed in proptest::collection::vec(0.01f64..3.0, 6),
            xs in proptest::collection::vec(-3.0f64..3.0, 7),
            y in -3.0f64..3.0,
        ) {
            let k = l1.len();
            let s = egu(l1, l2seed[..k].to_vec(), 0.01);
            let x = &xs[..k + 1];
            let (_, e) = s.error(x, y).unwrap();
            let direct = y - s.predict(x).unwrap();
            prop_assert!((e - direct).abs() <= 1e-12 * (1.0 + y.abs() + direct.abs()));
            let sum: f64 = s.effective_weights().iter().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-12);
        }
    }
}
