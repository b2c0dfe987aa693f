//! The bounded Lyapunov function `V_eps`, the generator action, and
//! finite-range certificates for the growth hypotheses and drift inequalities.
//!
//! Asymptotic statements ("for |n| large", `f >> g`) cannot be decided by a
//! finite computation. They are reported as [`Verdict::PassOnRange`] when they
//! hold on the checked range and the relevant ratio keeps growing over its top
//! half; flat ratios give a failure and anything else is inconclusive.

mod drift;
mod hypotheses;
mod sweep;

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::Result;
use crate::model::{Model, State};

pub use drift::{
    check_conditional_drift, check_drift, conditional_laws, ConditionalDriftOptions, ConditionalLaws,
    DriftGenerator,
};
pub use hypotheses::{
    check_catastrophes, check_h1, check_h2, check_multibirth, check_remark1, check_thm2,
    default_cr, fitted_exponents, thm2_threshold, thm2_working_lhs, Exponents,
    DEFAULT_GROWTH_THRESHOLD,
};
pub use sweep::{sweep_levels, sweep_states};

/// `V_eps(n) = sum_{j=1}^{|n|} j^{-(1+eps)}` on the interior, `0` on the
/// absorbing set.
pub fn v_eps(n: &State, eps: f64) -> f64 {
    if !n.is_interior() {
        return 0.0;
    }
    partial_sum(0, n.size(), eps)
}

/// `sum_{j=from+1}^{to} j^{-(1+eps)}`, ascending.
fn partial_sum(from: u64, to: u64, eps: f64) -> f64 {
    let p = -(1.0 + eps);
    ((from + 1)..=to).map(|j| (j as f64).powf(p)).sum()
}

/// Bracket of `V_eps(n) - V_eps(m)` for `1 <= |m| <= |n|`:
/// `(1/eps)((|m|+1)^-eps - (|n|+1)^-eps)` and `(1/eps)(|m|^-eps - |n|^-eps)`.
pub fn v_eps_bounds(m_size: u64, n_size: u64, eps: f64) -> (f64, f64) {
    let (m, n) = (m_size as f64, n_size as f64);
    let lower = ((m + 1.0).powf(-eps) - (n + 1.0).powf(-eps)) / eps;
    let upper = (m.powf(-eps) - n.powf(-eps)) / eps;
    (lower, upper)
}

/// Prefix sums of `j^{-(1+eps)}`, so that `V_eps` and its increments cost O(1)
/// for sizes up to the table length.
#[derive(Debug, Clone)]
pub struct VTable {
    eps: f64,
    prefix: Vec<f64>,
}

impl VTable {
    pub fn new(eps: f64, max_size: u64) -> Self {
        let p = -(1.0 + eps);
        let mut prefix = Vec::with_capacity(max_size as usize + 1);
        let mut acc = 0.0;
        prefix.push(0.0);
        for j in 1..=max_size {
            acc += (j as f64).powf(p);
            prefix.push(acc);
        }
        VTable { eps, prefix }
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    fn prefix(&self, size: u64) -> f64 {
        match self.prefix.get(size as usize) {
            Some(v) => *v,
            None => {
                let last = self.prefix.len() as u64 - 1;
                self.prefix[last as usize] + partial_sum(last, size, self.eps)
            }
        }
    }

    pub fn value(&self, n: &State) -> f64 {
        if n.is_interior() {
            self.prefix(n.size())
        } else {
            0.0
        }
    }

    /// `V(to) - V(from)` for an interior `from`, summed over the sizes in
    /// between rather than subtracted, to keep the small increments accurate.
    pub fn increment(&self, from: &State, to: &State) -> f64 {
        if !to.is_interior() {
            return -self.value(from);
        }
        let (a, b) = (from.size(), to.size());
        match a.cmp(&b) {
            std::cmp::Ordering::Equal => 0.0,
            std::cmp::Ordering::Less => partial_sum(a, b, self.eps),
            std::cmp::Ordering::Greater => -partial_sum(b, a, self.eps),
        }
    }
}

/// `Lf(n) = sum over moves of rate * (f(target) - f(n))`. `f` is evaluated on
/// the absorbing targets as given; the usual convention is `f = 0` there.
pub fn apply_generator(model: &Model, f: impl Fn(&State) -> f64, n: &State) -> Result<f64> {
    let fx = f(n);
    Ok(model
        .transitions(n)?
        .iter()
        .map(|t| t.rate * (f(&t.target) - fx))
        .sum())
}

/// `L V_eps (n)`, using exact increments of `V_eps`.
pub fn lv_eps(model: &Model, table: &VTable, n: &State) -> Result<f64> {
    Ok(model
        .transitions(n)?
        .iter()
        .map(|t| t.rate * table.increment(n, &t.target))
        .sum())
}

/// Concrete counterexample attached to a failed check.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Witness {
    State(State),
    Time(f64),
    /// The failure is a property of the declared or fitted constants.
    Parameters(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum Verdict {
    PassOnRange,
    Fail { witness: Witness, reason: String },
    Inconclusive { reason: String },
}

impl Verdict {
    pub fn is_pass(&self) -> bool {
        matches!(self, Verdict::PassOnRange)
    }

    pub fn is_fail(&self) -> bool {
        matches!(self, Verdict::Fail { .. })
    }

    pub(crate) fn fail(witness: Witness, reason: impl Into<String>) -> Self {
        Verdict::Fail {
            witness,
            reason: reason.into(),
        }
    }

    pub(crate) fn inconclusive(reason: impl Into<String>) -> Self {
        Verdict::Inconclusive {
            reason: reason.into(),
        }
    }
}

/// Verdict on one hypothesis with the constants that witness it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub hypothesis: String,
    #[serde(flatten)]
    pub verdict: Verdict,
    pub constants: BTreeMap<String, f64>,
    pub n_check: Option<u64>,
    /// Smallest slack of the checked inequality; negative when it fails.
    pub margin: Option<f64>,
    /// Diagnostic curve `(|n|, value)` the verdict was read from.
    pub curve: Vec<(f64, f64)>,
    pub notes: Vec<String>,
}

impl AssumptionReport {
    pub(crate) fn new(hypothesis: &str, verdict: Verdict) -> Self {
        AssumptionReport {
            hypothesis: hypothesis.to_string(),
            verdict,
            constants: BTreeMap::new(),
            n_check: None,
            margin: None,
            curve: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub(crate) fn constant(mut self, key: &str, value: f64) -> Self {
        self.constants.insert(key.to_string(), value);
        self
    }
}

/// Constants for a drift inequality, re-verified on every checked point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftReport {
    /// Inequality in words, e.g. `LV <= C1 - C2 |n|^p`.
    pub inequality: String,
    #[serde(flatten)]
    pub verdict: Verdict,
    pub constants: BTreeMap<String, f64>,
    pub n_check: Option<u64>,
    pub points_checked: usize,
    pub worst_margin: f64,
    /// `(|n|, max LV_eps)` for the pointwise drift; `(t, integrand)` for the
    /// conditional drift.
    pub curve: Vec<(f64, f64)>,
    pub notes: Vec<String>,
}

/// Admissible window for `eps`: `(0, gamma - gamma beta2)`.
pub fn eps_window(gamma: f64, beta2: f64) -> (f64, f64) {
    (0.0, gamma - gamma * beta2)
}

/// Midpoint of [`eps_window`].
pub fn default_eps(gamma: f64, beta2: f64) -> f64 {
    eps_window(gamma, beta2).1 / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ExtensionSpec, PowerTerm, RateSpec};

    fn logistic() -> Model {
        Model::constant(1.0, &[1.0], &[0.0], &[vec![1.0]]).unwrap()
    }

    #[test]
    fn v_eps_values() {
        assert_eq!(v_eps(&State::from([1, 1]), 1.0), 1.25);
        assert!((v_eps(&State::from([1, 2]), 1.0) - 49.0 / 36.0).abs() < 1e-15);
        assert_eq!(v_eps(&State::from([0, 5]), 1.0), 0.0);
    }

    #[test]
    fn bounds_example() {
        let (lo, hi) = v_eps_bounds(1, 3, 1.0);
        assert!((lo - 0.25).abs() < 1e-15);
        assert!((hi - 2.0 / 3.0).abs() < 1e-15);
        let diff = v_eps(&State::from([3]), 1.0) - v_eps(&State::from([1]), 1.0);
        assert!(lo <= diff && diff <= hi);
        assert_eq!(v_eps_bounds(5, 5, 0.3), (0.0, 0.0));
        let (lo, hi) = v_eps_bounds(4, 9, 0.5);
        let diff = v_eps(&State::from([9]), 0.5) - v_eps(&State::from([4]), 0.5);
        assert!(lo <= diff && diff <= hi, "{lo} {diff} {hi}");
    }

    #[test]
    fn table_matches_direct_sum() {
        let t = VTable::new(0.5, 50);
        for s in [1u64, 7, 50, 51, 120] {
            let n = State::from([s]);
            assert!((t.value(&n) - v_eps(&n, 0.5)).abs() < 1e-14);
        }
        let inc = t.increment(&State::from([3]), &State::from([5]));
        assert!((inc - (4f64.powf(-1.5) + 5f64.powf(-1.5))).abs() < 1e-16);
        assert_eq!(t.increment(&State::from([3]), &State::from([0])), -t.value(&State::from([3])));
    }

    #[test]
    fn generator_examples() {
        let m = Model::constant(1.0, &[1.0, 1.0], &[0.0, 0.0], &[vec![1.0, 1.0], vec![1.0, 1.0]])
            .unwrap();
        let ind = |n: &State| if n.is_interior() { 1.0 } else { 0.0 };
        assert_eq!(apply_generator(&m, ind, &State::from([1, 2])).unwrap(), -3.0);
        assert_eq!(apply_generator(&m, |_| 4.2, &State::from([3, 2])).unwrap(), 0.0);
        let lv = apply_generator(&logistic(), |n| v_eps(n, 1.0), &State::from([1])).unwrap();
        assert!((lv + 0.75).abs() < 1e-15);
        let table = VTable::new(1.0, 10);
        assert!((lv_eps(&logistic(), &table, &State::from([1])).unwrap() + 0.75).abs() < 1e-15);
    }

    #[test]
    fn generator_sees_litters() {
        let mut rates = RateSpec::constant(&[1.0], &[0.0], &[vec![1.0]]);
        rates.birth[0] = PowerTerm::total(1.0, 0.0).into();
        let ext = ExtensionSpec {
            catastrophe: None,
            multibirth: Some(crate::model::MultiBirth::shared(crate::model::LitterLaw::Finite(
                vec![crate::model::Litter { k: vec![2], p: 1.0 }],
            ))),
        };
        let m = Model::new(1.0, rates, ext).unwrap();
        let lf = apply_generator(&m, |n| n.size() as f64, &State::from([3])).unwrap();
        // births +2 at rate 3, deaths -1 at rate 9
        assert_eq!(lf, 6.0 - 9.0);
    }
}
