use alloc::vec::Vec;

use super::{
    check_mass, check_mu, check_weights_positive, exponentiated_update, Mixture, MixtureStep,
    Multiplicative, UpdateForm, EG_INIT_FLOOR,
};
use crate::constituent::dot;
use crate::error::{check_len, Error, Result};

/// Unconstrained combiner with signed weights `w = w1 - w2`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnconstrainedMixture {
    aug: Vec<f64>,
    mu: f64,
    kind: Multiplicative,
    form: UpdateForm,
}

impl UnconstrainedMixture {
    pub fn new(w1: Vec<f64>, w2: Vec<f64>, mu: f64, kind: Multiplicative) -> Result<Self> {
        check_len(w1.len(), w2.len())?;
        let mut aug = w1;
        aug.extend_from_slice(&w2);
        Self::from_augmented(aug, mu, kind)
    }

    /// From the augmented vector `[w1; w2]`.
    pub fn from_augmented(aug: Vec<f64>, mu: f64, kind: Multiplicative) -> Result<Self> {
        if aug.len() < 4 || !aug.len().is_multiple_of(2) {
            return Err(Error::invalid(
                "an unconstrained mixture needs at least two constituents",
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

    /// Start with every weight equal to `1/m`.
    ///
    /// EGU: `w1 = 1/m + b`, `w2 = b` with `b = (m-1)/(2m)`, so `w1 + w2 = 1`.
    /// EG: `w1 = (u+1)/(2m)`, `w2 = (u-1)/(2m)`; for `u = 1` the zero `w2`
    /// entries are floored at [`EG_INIT_FLOOR`] and the vector rescaled to `u`.
    pub fn uniform(m: usize, mu: f64, kind: Multiplicative) -> Result<Self> {
        if m < 2 {
            return Err(Error::invalid(
                "an unconstrained mixture needs at least two constituents",
            ));
        }
        kind.validate()?;
        let mf = m as f64;
        let (w1, w2) = match kind {
            Multiplicative::Egu => {
                let b = (mf - 1.0) / (2.0 * mf);
                (1.0 / mf + b, b)
            }
            Multiplicative::Eg { u } => (
                (u + 1.0) / (2.0 * mf),
                ((u - 1.0) / (2.0 * mf)).max(EG_INIT_FLOOR),
            ),
        };
        let mut aug = alloc::vec![w1; m];
        aug.extend(core::iter::repeat_n(w2, m));
        if let Multiplicative::Eg { u } = kind {
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

    pub fn w1(&self) -> &[f64] {
        &self.aug[..self.constituents()]
    }

    pub fn w2(&self) -> &[f64] {
        &self.aug[self.constituents()..]
    }

    pub fn step_with(&self, x: &[f64], y: f64, form: UpdateForm) -> Result<MixtureStep<Self>> {
        let prediction = self.predict(x)?;
        let e = y - prediction;
        let (aug, saturated) = exponentiated_update(&self.aug, x, self.mu * e, form, self.kind)?;
        Ok(MixtureStep {
            prediction,
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

impl Mixture for UnconstrainedMixture {
    fn constituents(&self) -> usize {
        self.aug.len() / 2
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
        self.w1()
            .iter()
            .zip(self.w2())
            .map(|(a, b)| a - b)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use approx::assert_relative_eq;

    #[test]
    fn egu_step_by_hand() {
        let s =
            UnconstrainedMixture::new(vec![0.8, 0.3], vec![0.1, 0.1], 0.01, Multiplicative::Egu)
                .unwrap();
        let step = s.step(&[1.0, -1.0], 1.0).unwrap();
        assert_relative_eq!(step.prediction, 0.5, epsilon = 1e-15);
        assert_relative_eq!(step.error, 0.5, epsilon = 1e-15);
        let want = [
            0.804_010_016_687_520_9,
            0.298_503_743_757_804_7,
            0.099_501_247_919_268_23,
            0.100_501_252_085_940_1,
        ];
        for (got, want) in step.next.state().iter().zip(want) {
            assert_relative_eq!(*got, want, max_relative = 1e-14);
        }
    }

    #[test]
    fn zero_error_is_a_fixed_point() {
        let s =
            UnconstrainedMixture::new(vec![0.75, 0.5], vec![0.25, 0.25], 0.3, Multiplicative::Egu)
                .unwrap();
        let step = s.step(&[1.0, -1.0], 0.25).unwrap();
        assert_eq!(step.error, 0.0);
        assert_eq!(step.next, s);
    }

    #[test]
    fn single_constituent_rejected() {
        assert!(UnconstrainedMixture::new(vec![0.5], vec![0.5], 0.1, Multiplicative::Egu).is_err());
        assert!(UnconstrainedMixture::uniform(1, 0.1, Multiplicative::Egu).is_err());
    }

    #[test]
    fn eg_pure_renormalization() {
        use crate::mixture::exponentiated_update;
        let (next, _) = exponentiated_update(
            &[3.0, 3.0, 2.0, 4.0],
            &[0.4, -0.2],
            0.0,
            UpdateForm::Exact,
            Multiplicative::Eg { u: 3.0 },
        )
        .unwrap();
        assert_eq!(next, vec![0.75, 0.75, 0.5, 1.0]);

        let s =
            UnconstrainedMixture::from_augmented(next, 0.0, Multiplicative::Eg { u: 3.0 }).unwrap();
        let step = s.step(&[0.4, -0.2], 2.0).unwrap();
        assert_eq!(step.next.state(), &[0.75, 0.75, 0.5, 1.0]);
    }

    #[test]
    fn eg_matches_exponentiate_then_normalize() {
        let u = 3.0;
        let aug = vec![1.0, 0.6, 0.9, 0.5];
        let s = UnconstrainedMixture::from_augmented(aug.clone(), 0.05, Multiplicative::Eg { u })
            .unwrap();
        let x = [0.7, -1.3];
        let y = 0.4;
        let step = s.step(&x, y).unwrap();
        let e = y - (0.1 * 0.7 + 0.1 * -1.3);
        assert_relative_eq!(step.error, e, epsilon = 1e-15);
        let raw = [
            aug[0] * (0.05 * e * x[0]).exp(),
            aug[1] * (0.05 * e * x[1]).exp(),
            aug[2] * (-0.05 * e * x[0]).exp(),
            aug[3] * (-0.05 * e * x[1]).exp(),
        ];
        let total: f64 = raw.iter().sum();
        for (got, r) in step.next.state().iter().zip(raw) {
            assert_relative_eq!(*got, u * r / total, max_relative = 1e-14);
        }
    }

    #[test]
    fn uniform_egu_pairs_have_unit_mass() {
        let s = UnconstrainedMixture::uniform(4, 0.01, Multiplicative::Egu).unwrap();
        assert_eq!(s.w1(), &[0.625; 4]);
        assert_eq!(s.w2(), &[0.375; 4]);
    }

    #[test]
    fn uniform_eg_floor_for_unit_mass() {
        let s = UnconstrainedMixture::uniform(2, 0.1, Multiplicative::Eg { u: 1.0 }).unwrap();
        assert!(s.w2().iter().all(|&v| v > 0.0 && v < 1e-5));
        assert_relative_eq!(s.state().iter().sum::<f64>(), 1.0, max_relative = 1e-12);
        let s = UnconstrainedMixture::uniform(2, 0.1, Multiplicative::Eg { u: 3.0 }).unwrap();
        assert_eq!(s.state(), &[1.0, 1.0, 0.5, 0.5]);
    }
}
