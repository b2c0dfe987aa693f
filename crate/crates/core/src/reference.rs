//! Small instances used by the acceptance suite, the examples and the CLI
//! templates.

use crate::error::Result;
use crate::model::{
    ExtensionSpec, Litter, LitterLaw, Model, MultiBirth, PowerBase, PowerTerm, RateSpec, State,
};
use crate::truncation::{enumerate_space, SubGenerator};

/// Truncation level used with the two-type references.
pub const REFERENCE_LEVEL: u64 = 60;

/// Two-type logistic model, `gamma = 1`, `b = (3, 3)`, `d = 0`,
/// `c = [[1, 0.1], [0.1, 1]]`.
pub fn logistic_2d() -> Model {
    Model::constant(1.0, &[3.0, 3.0], &[0.0, 0.0], &[vec![1.0, 0.1], vec![0.1, 1.0]])
        .expect("valid reference model")
}

/// Initial state for the Monte Carlo runs on [`logistic_2d`].
pub fn logistic_2d_start() -> State {
    State::from([3, 3])
}

/// Strong intra-specific competition: `b = (4, 4)`, `d = 0`, `c_ii = 2`,
/// `c_ij = 0.1 (1 + |n|)^(-1/2)`.
pub fn strong_intra_2d() -> Model {
    let cross = PowerTerm {
        coef: 0.1,
        exponent: -0.5,
        shift: 1.0,
        base: PowerBase::Total,
    };
    let rates = RateSpec {
        birth: vec![4.0.into(), 4.0.into()],
        death: vec![0.0.into(), 0.0.into()],
        competition: vec![vec![2.0.into(), cross.into()], vec![cross.into(), 2.0.into()]],
        declared: Default::default(),
    };
    Model::new(1.0, rates, ExtensionSpec::default()).expect("valid reference model")
}

/// One-type logistic model: `b = 1`, `d = 0`, `c = 1`, `gamma = 1`.
pub fn logistic_1d() -> Model {
    Model::constant(1.0, &[1.0], &[0.0], &[vec![1.0]]).expect("valid reference model")
}

/// One type with `b_n = n`, `d_n = n^2` and catastrophes at rate `a_n = slope * n`.
pub fn catastrophe_1d(slope: f64) -> Result<Model> {
    logistic_1d().with_extensions(ExtensionSpec {
        catastrophe: Some(PowerTerm::total(slope, 1.0).into()),
        multibirth: None,
    })
}

/// One type with `b_n = n`, `d_n = n^2` and litters uniform on `{1, 2, 3}`.
pub fn multibirth_1d() -> Result<Model> {
    let litters = (1..=3)
        .map(|k| Litter {
            k: vec![k],
            p: 1.0 / 3.0,
        })
        .collect();
    logistic_1d().with_extensions(ExtensionSpec {
        catastrophe: None,
        multibirth: Some(MultiBirth::shared(LitterLaw::Finite(litters))),
    })
}

/// The 2-state sub-generator `[[-2, 1], [4, -6]]` on `{(1), (2)}`.
pub fn two_state() -> SubGenerator {
    SubGenerator::from_dense(
        enumerate_space(1, 2).expect("nonempty space"),
        &[vec![-2.0, 1.0], vec![4.0, -6.0]],
    )
    .expect("valid 2x2 sub-generator")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn references_build() {
        assert_eq!(logistic_2d().dim(), 2);
        let m = strong_intra_2d();
        let c = m.competition(0, 1, &State::from([1, 2]));
        assert!((c - 0.05).abs() < 1e-15);
        assert!(catastrophe_1d(0.5).is_ok());
        assert!(multibirth_1d().is_ok());
        assert_eq!(two_state().len(), 2);
    }
}
