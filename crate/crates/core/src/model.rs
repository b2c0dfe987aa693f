//! State space, rate structure and transition enumeration of the multi-type
//! competitive birth-death process.
//!
//! From an interior state `n` (every coordinate at least 1) the process moves
//!
//! * to `n + e_j` at rate `n_j b_j(n)` (or to `n + k` at rate `n_j b_j(n) p_{n,k}`
//!   when litters are enabled),
//! * to `n - e_j` at rate `n_j [d_j(n) + (sum_k c_jk(n) n_k)^gamma]`,
//! * to the absorbed set at rate `a(n)` when catastrophes are enabled.
//!
//! Every state with a zero coordinate is absorbing. Rates are never evaluated
//! there.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{QsdError, Result};

/// Population vector: number of individuals of each type.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct State(Vec<u64>);

impl State {
    pub fn new(coords: Vec<u64>) -> Self {
        State(coords)
    }

    /// The all-ones state `(1, ..., 1)`.
    pub fn ones(dim: usize) -> Self {
        State(vec![1; dim])
    }

    pub fn zeros(dim: usize) -> Self {
        State(vec![0; dim])
    }

    pub fn coords(&self) -> &[u64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Total population `|n|`.
    pub fn size(&self) -> u64 {
        self.0.iter().sum()
    }

    pub fn is_interior(&self) -> bool {
        !self.0.is_empty() && self.0.iter().all(|&x| x >= 1)
    }

    pub fn into_inner(self) -> Vec<u64> {
        self.0
    }

    pub(crate) fn plus(&self, k: &[u64]) -> State {
        State(self.0.iter().zip(k).map(|(a, b)| a + b).collect())
    }

    pub(crate) fn minus_unit(&self, j: usize) -> State {
        let mut v = self.0.clone();
        v[j] -= 1;
        State(v)
    }

    pub(crate) fn plus_unit(&self, j: usize) -> State {
        let mut v = self.0.clone();
        v[j] += 1;
        State(v)
    }
}

impl From<Vec<u64>> for State {
    fn from(v: Vec<u64>) -> Self {
        State(v)
    }
}

impl<const N: usize> From<[u64; N]> for State {
    fn from(v: [u64; N]) -> Self {
        State(v.to_vec())
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, x) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{x}")?;
        }
        write!(f, ")")
    }
}

impl fmt::Debug for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// True iff some coordinate of `n` is 0, i.e. `n` lies in the absorbing set.
pub fn is_absorbed(n: &State) -> bool {
    n.coords().contains(&0)
}

/// Quantity a power-law coefficient is evaluated against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PowerBase {
    /// `|n|`
    Total,
    /// `n_i`
    Coord(usize),
}

/// `coef * (shift + base(n))^exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerTerm {
    pub coef: f64,
    pub exponent: f64,
    pub shift: f64,
    pub base: PowerBase,
}

impl PowerTerm {
    pub fn total(coef: f64, exponent: f64) -> Self {
        PowerTerm {
            coef,
            exponent,
            shift: 0.0,
            base: PowerBase::Total,
        }
    }

    pub fn eval(&self, n: &State) -> f64 {
        let x = match self.base {
            PowerBase::Total => n.size() as f64,
            PowerBase::Coord(i) => n.coords()[i] as f64,
        };
        if self.exponent == 0.0 {
            return self.coef;
        }
        self.coef * (self.shift + x).powf(self.exponent)
    }
}

/// Values tabulated on the box `{1..=extent}^r`; outside the box coordinates
/// are clamped to it.
#[derive(Debug, Clone, PartialEq)]
pub struct RateTable {
    extent: u64,
    dim: usize,
    values: Vec<f64>,
}

impl RateTable {
    /// `values` is in lexicographic order of the box states.
    pub fn new(dim: usize, extent: u64, values: Vec<f64>) -> Result<Self> {
        let expected = (extent as usize).checked_pow(dim as u32).unwrap_or(usize::MAX);
        if dim == 0 || extent == 0 || values.len() != expected {
            return Err(QsdError::InvalidModel {
                key: "table".into(),
                reason: format!(
                    "expected {expected} values for extent {extent} in dimension {dim}, got {}",
                    values.len()
                ),
            });
        }
        Ok(RateTable { extent, dim, values })
    }

    pub fn from_fn(dim: usize, extent: u64, f: impl Fn(&State) -> f64) -> Result<Self> {
        let mut values = Vec::new();
        let mut cur = vec![1u64; dim];
        loop {
            values.push(f(&State(cur.clone())));
            let mut i = dim;
            loop {
                if i == 0 {
                    return RateTable::new(dim, extent, values);
                }
                i -= 1;
                if cur[i] < extent {
                    cur[i] += 1;
                    break;
                }
                cur[i] = 1;
            }
        }
    }

    pub fn eval(&self, n: &State) -> f64 {
        let mut idx = 0usize;
        for &x in n.coords().iter().take(self.dim) {
            let x = x.clamp(1, self.extent) - 1;
            idx = idx * self.extent as usize + x as usize;
        }
        self.values[idx]
    }
}

pub type RateCallback = Arc<dyn Fn(&State) -> f64 + Send + Sync>;

/// One scalar rate function `n -> value`.
#[derive(Clone)]
pub enum Coefficient {
    Constant(f64),
    Power(PowerTerm),
    Tabulated(Arc<RateTable>),
    Callback(RateCallback),
}

impl Coefficient {
    pub fn callback(f: impl Fn(&State) -> f64 + Send + Sync + 'static) -> Self {
        Coefficient::Callback(Arc::new(f))
    }

    #[inline]
    pub fn eval(&self, n: &State) -> f64 {
        match self {
            Coefficient::Constant(v) => *v,
            Coefficient::Power(p) => p.eval(n),
            Coefficient::Tabulated(t) => t.eval(n),
            Coefficient::Callback(f) => f(n),
        }
    }

    pub fn as_constant(&self) -> Option<f64> {
        match self {
            Coefficient::Constant(v) => Some(*v),
            _ => None,
        }
    }

    fn family(&self) -> RateFamily {
        match self {
            Coefficient::Constant(_) => RateFamily::Constant,
            Coefficient::Power(_) => RateFamily::PowerLaw,
            Coefficient::Tabulated(_) => RateFamily::Tabulated,
            Coefficient::Callback(_) => RateFamily::Callback,
        }
    }
}

impl From<f64> for Coefficient {
    fn from(v: f64) -> Self {
        Coefficient::Constant(v)
    }
}

impl From<PowerTerm> for Coefficient {
    fn from(p: PowerTerm) -> Self {
        Coefficient::Power(p)
    }
}

impl fmt::Debug for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coefficient::Constant(v) => write!(f, "Constant({v})"),
            Coefficient::Power(p) => write!(f, "{p:?}"),
            Coefficient::Tabulated(t) => write!(f, "Tabulated(extent={})", t.extent),
            Coefficient::Callback(_) => write!(f, "Callback(..)"),
        }
    }
}

/// Most general coefficient kind appearing in a rate specification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateFamily {
    Constant,
    PowerLaw,
    Tabulated,
    Callback,
}

/// Growth exponents declared for the (H1)-type bounds
/// `b_i, d_i <= const |n|^beta1` and `c_ii >= const |n|^-beta2`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DeclaredExponents {
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
}

/// Per-capita birth `b`, per-capita death `d` and competition matrix `c`.
#[derive(Debug, Clone)]
pub struct RateSpec {
    pub birth: Vec<Coefficient>,
    pub death: Vec<Coefficient>,
    pub competition: Vec<Vec<Coefficient>>,
    pub declared: DeclaredExponents,
}

impl RateSpec {
    pub fn constant(birth: &[f64], death: &[f64], competition: &[Vec<f64>]) -> Self {
        RateSpec {
            birth: birth.iter().map(|&v| v.into()).collect(),
            death: death.iter().map(|&v| v.into()).collect(),
            competition: competition
                .iter()
                .map(|row| row.iter().map(|&v| v.into()).collect())
                .collect(),
            declared: DeclaredExponents::default(),
        }
    }

    pub fn with_exponents(mut self, beta1: Option<f64>, beta2: Option<f64>) -> Self {
        self.declared = DeclaredExponents { beta1, beta2 };
        self
    }

    pub fn family(&self) -> RateFamily {
        self.birth
            .iter()
            .chain(&self.death)
            .chain(self.competition.iter().flatten())
            .map(Coefficient::family)
            .max()
            .unwrap_or(RateFamily::Constant)
    }

    /// The common value when every `c_ij` is the same constant.
    pub fn neutral_competition(&self) -> Option<f64> {
        let first = self.competition.first()?.first()?.as_constant()?;
        self.competition
            .iter()
            .flatten()
            .all(|c| c.as_constant() == Some(first))
            .then_some(first)
    }
}

/// One possible litter `k` with its probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Litter {
    pub k: Vec<u64>,
    pub p: f64,
}

pub type LitterCallback = Arc<dyn Fn(&State) -> Vec<Litter> + Send + Sync>;

/// Law of the litter added at a birth event.
#[derive(Clone)]
pub enum LitterLaw {
    /// State-independent law with finite support.
    Finite(Vec<Litter>),
    /// State-dependent law; `declared_mean` is `sup_n sum_k |k| p_{n,k}` if known.
    StateDependent {
        law: LitterCallback,
        declared_mean: Option<f64>,
    },
}

impl LitterLaw {
    pub fn litters(&self, n: &State) -> Vec<Litter> {
        match self {
            LitterLaw::Finite(v) => v.clone(),
            LitterLaw::StateDependent { law, .. } => law(n),
        }
    }
}

impl fmt::Debug for LitterLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LitterLaw::Finite(v) => f.debug_tuple("Finite").field(v).finish(),
            LitterLaw::StateDependent { declared_mean, .. } => f
                .debug_struct("StateDependent")
                .field("declared_mean", declared_mean)
                .finish_non_exhaustive(),
        }
    }
}

/// Litter laws: either one law shared by all parent types or one per type.
#[derive(Debug, Clone)]
pub struct MultiBirth {
    pub laws: Vec<LitterLaw>,
}

impl MultiBirth {
    pub fn shared(law: LitterLaw) -> Self {
        MultiBirth { laws: vec![law] }
    }

    pub fn law_for(&self, parent: usize) -> &LitterLaw {
        if self.laws.len() == 1 {
            &self.laws[0]
        } else {
            &self.laws[parent]
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ExtensionSpec {
    /// Rate `a(n)` of a jump straight into the absorbing set.
    pub catastrophe: Option<Coefficient>,
    pub multibirth: Option<MultiBirth>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TransitionKind {
    Birth { parent: usize },
    Death { kind: usize },
    Catastrophe,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub target: State,
    pub rate: f64,
    pub kind: TransitionKind,
}

/// Mass tolerance for litter laws.
pub const LITTER_MASS_TOL: f64 = 1e-12;

/// Immutable birth-death model on `Z_+^r`.
#[derive(Debug, Clone)]
pub struct Model {
    dim: usize,
    gamma: f64,
    rates: RateSpec,
    extensions: ExtensionSpec,
}

impl Model {
    /// Builds and validates a model. Rate invariants (`b_i > 0`, `c_ii > 0`,
    /// `d_i >= 0`, `c_ij >= 0`, `a >= 0`, litter mass 1) are checked on every
    /// interior state with `|n| <= validation_level(dim)`.
    pub fn new(gamma: f64, rates: RateSpec, extensions: ExtensionSpec) -> Result<Self> {
        let model = Model::unchecked(gamma, rates, extensions)?;
        model.validate()?;
        Ok(model)
    }

    /// Shape checks only; rate positivity is not verified. Intended for test
    /// scaffolding that deliberately breaks irreducibility.
    pub fn unchecked(gamma: f64, rates: RateSpec, extensions: ExtensionSpec) -> Result<Self> {
        let dim = rates.birth.len();
        let bad = |key: &str, reason: String| QsdError::InvalidModel {
            key: key.to_string(),
            reason,
        };
        if dim == 0 {
            return Err(bad("model.r", "dimension must be at least 1".into()));
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(bad("model.gamma", format!("gamma must be > 0, got {gamma}")));
        }
        if rates.death.len() != dim {
            return Err(bad(
                "model.d",
                format!("expected {dim} entries, got {}", rates.death.len()),
            ));
        }
        if rates.competition.len() != dim || rates.competition.iter().any(|r| r.len() != dim) {
            return Err(bad("model.c", format!("expected a {dim}x{dim} matrix")));
        }
        if let Some(b1) = rates.declared.beta1 {
            if !(b1 >= 0.0 && b1.is_finite()) {
                return Err(bad("model.beta1", format!("beta1 must be >= 0, got {b1}")));
            }
        }
        if let Some(b2) = rates.declared.beta2 {
            if !(b2 < 1.0) {
                return Err(bad("model.beta2", format!("beta2 must be < 1, got {b2}")));
            }
        }
        if let Some(mb) = &extensions.multibirth {
            if mb.laws.len() != 1 && mb.laws.len() != dim {
                return Err(bad(
                    "extensions.multibirth",
                    format!("expected 1 or {dim} litter laws, got {}", mb.laws.len()),
                ));
            }
            for law in &mb.laws {
                if let LitterLaw::Finite(litters) = law {
                    check_litters(litters, dim, "extensions.multibirth")?;
                }
            }
        }
        Ok(Model {
            dim,
            gamma,
            rates,
            extensions,
        })
    }

    pub fn constant(
        gamma: f64,
        birth: &[f64],
        death: &[f64],
        competition: &[Vec<f64>],
    ) -> Result<Self> {
        Model::new(
            gamma,
            RateSpec::constant(birth, death, competition),
            ExtensionSpec::default(),
        )
    }

    pub fn with_extensions(self, extensions: ExtensionSpec) -> Result<Self> {
        Model::new(self.gamma, self.rates, extensions)
    }

    fn validate(&self) -> Result<()> {
        let level = validation_level(self.dim);
        for n in interior_states_up_to(self.dim, level) {
            for i in 0..self.dim {
                let b = self.rates.birth[i].eval(&n);
                if !(b > 0.0) {
                    return Err(QsdError::InvalidModel {
                        key: format!("model.b[{i}]"),
                        reason: format!("birth rate must be > 0, got {b} at {n}"),
                    });
                }
                let d = self.rates.death[i].eval(&n);
                if !(d >= 0.0) {
                    return Err(QsdError::InvalidModel {
                        key: format!("model.d[{i}]"),
                        reason: format!("death rate must be >= 0, got {d} at {n}"),
                    });
                }
                for j in 0..self.dim {
                    let c = self.rates.competition[i][j].eval(&n);
                    let ok = if i == j { c > 0.0 } else { c >= 0.0 };
                    if !ok {
                        return Err(QsdError::InvalidModel {
                            key: format!("model.c[{i}][{j}]"),
                            reason: format!(
                                "competition must be {} 0, got {c} at {n}",
                                if i == j { ">" } else { ">=" }
                            ),
                        });
                    }
                }
            }
            if let Some(a) = &self.extensions.catastrophe {
                let v = a.eval(&n);
                if !(v >= 0.0) {
                    return Err(QsdError::InvalidModel {
                        key: "extensions.catastrophe".into(),
                        reason: format!("catastrophe rate must be >= 0, got {v} at {n}"),
                    });
                }
            }
            if let Some(mb) = &self.extensions.multibirth {
                for law in &mb.laws {
                    if let LitterLaw::StateDependent { law, .. } = law {
                        check_litters(&law(&n), self.dim, "extensions.multibirth")?;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn rates(&self) -> &RateSpec {
        &self.rates
    }

    pub fn extensions(&self) -> &ExtensionSpec {
        &self.extensions
    }

    pub fn birth(&self, i: usize, n: &State) -> f64 {
        self.rates.birth[i].eval(n)
    }

    pub fn death(&self, i: usize, n: &State) -> f64 {
        self.rates.death[i].eval(n)
    }

    pub fn competition(&self, i: usize, j: usize, n: &State) -> f64 {
        self.rates.competition[i][j].eval(n)
    }

    /// `sum_k c_jk(n) n_k`, the competition pressure felt by type `j`.
    pub fn competition_pressure(&self, j: usize, n: &State) -> f64 {
        n.coords()
            .iter()
            .enumerate()
            .map(|(k, &nk)| self.competition(j, k, n) * nk as f64)
            .sum()
    }

    /// `(sum_k c_jk(n) n_k)^gamma`, with `0^gamma = 0`.
    pub fn competition_term(&self, j: usize, n: &State) -> f64 {
        let s = self.competition_pressure(j, n);
        if s == 0.0 {
            0.0
        } else {
            s.powf(self.gamma)
        }
    }

    /// Per-capita death rate `d_j(n) + (sum_k c_jk(n) n_k)^gamma`.
    pub fn death_intensity(&self, j: usize, n: &State) -> f64 {
        self.death(j, n) + self.competition_term(j, n)
    }

    pub fn catastrophe(&self, n: &State) -> f64 {
        self.extensions
            .catastrophe
            .as_ref()
            .map_or(0.0, |a| a.eval(n))
    }

    fn check_state(&self, n: &State) -> Result<()> {
        if n.dim() != self.dim {
            return Err(QsdError::DimensionMismatch {
                state: n.clone(),
                expected: self.dim,
                got: n.dim(),
            });
        }
        if !n.is_interior() {
            return Err(QsdError::NotInterior(n.clone()));
        }
        Ok(())
    }

    /// All nonzero-rate moves from the interior state `n`: births for each type
    /// (one per litter under multi-birth), then deaths for each type, then the
    /// catastrophe jump to the zero state.
    pub fn transitions(&self, n: &State) -> Result<Vec<Transition>> {
        let mut out = Vec::with_capacity(2 * self.dim + 1);
        self.transitions_into(n, &mut out)?;
        Ok(out)
    }

    /// As [`Model::transitions`], reusing `out` (cleared first).
    pub fn transitions_into(&self, n: &State, out: &mut Vec<Transition>) -> Result<()> {
        self.check_state(n)?;
        out.clear();
        let finite = |what: &dyn Fn() -> String, value: f64| -> Result<f64> {
            if value.is_nan() || value < 0.0 {
                Err(QsdError::InvalidModel {
                    key: what(),
                    reason: format!("rate must be a nonnegative number, got {value} at {n}"),
                })
            } else if value.is_infinite() {
                Err(QsdError::RateOverflow {
                    state: n.clone(),
                    what: what(),
                    value,
                })
            } else {
                Ok(value)
            }
        };
        for j in 0..self.dim {
            let nj = n.coords()[j] as f64;
            let base = nj * self.birth(j, n);
            let base = finite(&|| format!("birth[{j}]"), base)?;
            if base == 0.0 {
                continue;
            }
            match &self.extensions.multibirth {
                None => out.push(Transition {
                    target: n.plus_unit(j),
                    rate: base,
                    kind: TransitionKind::Birth { parent: j },
                }),
                Some(mb) => {
                    for litter in mb.law_for(j).litters(n) {
                        let rate = base * litter.p;
                        if rate > 0.0 {
                            out.push(Transition {
                                target: n.plus(&litter.k),
                                rate,
                                kind: TransitionKind::Birth { parent: j },
                            });
                        }
                    }
                }
            }
        }
        for j in 0..self.dim {
            let nj = n.coords()[j] as f64;
            let rate = nj * self.death_intensity(j, n);
            let rate = finite(&|| format!("death[{j}]"), rate)?;
            if rate > 0.0 {
                out.push(Transition {
                    target: n.minus_unit(j),
                    rate,
                    kind: TransitionKind::Death { kind: j },
                });
            }
        }
        if self.extensions.catastrophe.is_some() {
            let rate = finite(&|| "catastrophe".to_string(), self.catastrophe(n))?;
            if rate > 0.0 {
                out.push(Transition {
                    target: State::zeros(self.dim),
                    rate,
                    kind: TransitionKind::Catastrophe,
                });
            }
        }
        Ok(())
    }

    /// Sum of the rates returned by [`Model::transitions`], in the same order.
    pub fn total_rate(&self, n: &State) -> Result<f64> {
        Ok(self.transitions(n)?.iter().map(|t| t.rate).sum())
    }
}

fn check_litters(litters: &[Litter], dim: usize, key: &str) -> Result<()> {
    let mut mass = 0.0;
    for (idx, l) in litters.iter().enumerate() {
        if l.k.len() != dim {
            return Err(QsdError::InvalidModel {
                key: format!("{key}[{idx}].k"),
                reason: format!("litter must have {dim} coordinates, got {}", l.k.len()),
            });
        }
        if l.k.iter().all(|&x| x == 0) {
            return Err(QsdError::InvalidModel {
                key: format!("{key}[{idx}].k"),
                reason: "litter must contain at least one individual".into(),
            });
        }
        if !(l.p >= 0.0 && l.p <= 1.0) {
            return Err(QsdError::InvalidModel {
                key: format!("{key}[{idx}].p"),
                reason: format!("probability must lie in [0, 1], got {}", l.p),
            });
        }
        mass += l.p;
    }
    if (mass - 1.0).abs() > LITTER_MASS_TOL {
        return Err(QsdError::InvalidModel {
            key: key.to_string(),
            reason: format!("litter law has total mass {mass}, expected 1"),
        });
    }
    Ok(())
}

/// Largest `|n|` at which [`Model::new`] validates rates.
pub fn validation_level(dim: usize) -> u64 {
    match dim {
        1 => 64,
        2 => 24,
        3 => 12,
        _ => dim as u64 + 3,
    }
}

/// Interior states with `|n| <= level`, lexicographic.
pub fn interior_states_up_to(dim: usize, level: u64) -> Vec<State> {
    let mut out = Vec::new();
    if dim == 0 || level < dim as u64 {
        return out;
    }
    let mut cur = vec![1u64; dim];
    fill(&mut cur, 0, level - (dim as u64 - 1), &mut out);
    out
}

// Coordinate `pos` ranges over 1..=budget where budget leaves 1 for each later slot.
fn fill(cur: &mut Vec<u64>, pos: usize, budget: u64, out: &mut Vec<State>) {
    let dim = cur.len();
    if pos == dim - 1 {
        for x in 1..=budget {
            cur[pos] = x;
            out.push(State(cur.clone()));
        }
        cur[pos] = 1;
        return;
    }
    for x in 1..=budget {
        cur[pos] = x;
        fill(cur, pos + 1, budget - x + 1, out);
    }
    cur[pos] = 1;
}

#[cfg(test)]
mod tests {
    use super::*;

    fn as_map(ts: &[Transition]) -> Vec<(Vec<u64>, f64)> {
        ts.iter()
            .map(|t| (t.target.coords().to_vec(), t.rate))
            .collect()
    }

    #[test]
    fn two_type_rates() {
        let m = Model::constant(1.0, &[1.0, 1.0], &[0.0, 0.0], &[vec![1.0, 1.0], vec![1.0, 1.0]])
            .unwrap();
        let ts = m.transitions(&State::from([1, 2])).unwrap();
        assert_eq!(
            as_map(&ts),
            vec![
                (vec![2, 2], 1.0),
                (vec![1, 3], 2.0),
                (vec![0, 2], 3.0),
                (vec![1, 1], 6.0)
            ]
        );
        assert_eq!(m.total_rate(&State::from([1, 2])).unwrap(), 12.0);
    }

    #[test]
    fn single_type_rates() {
        let m = Model::constant(1.0, &[1.0], &[0.0], &[vec![1.0]]).unwrap();
        let ts = m.transitions(&State::from([1])).unwrap();
        assert_eq!(as_map(&ts), vec![(vec![2], 1.0), (vec![0], 1.0)]);
        assert_eq!(m.total_rate(&State::from([1])).unwrap(), 2.0);
    }

    #[test]
    fn tiny_birth_rate_keeps_total_positive() {
        let m = Model::constant(1.0, &[1e-300], &[0.0], &[vec![1.0]]).unwrap();
        assert!(m.total_rate(&State::from([1])).unwrap() > 0.0);
    }

    #[test]
    fn twin_litters() {
        let ext = ExtensionSpec {
            catastrophe: None,
            multibirth: Some(MultiBirth::shared(LitterLaw::Finite(vec![Litter {
                k: vec![2],
                p: 1.0,
            }]))),
        };
        let m = Model::new(1.0, RateSpec::constant(&[1.0], &[0.0], &[vec![1.0]]), ext).unwrap();
        let ts = m.transitions(&State::from([3])).unwrap();
        assert_eq!(as_map(&ts), vec![(vec![5], 3.0), (vec![2], 9.0)]);
    }

    #[test]
    fn catastrophe_lands_on_zero_state() {
        let ext = ExtensionSpec {
            catastrophe: Some(PowerTerm::total(0.5, 1.0).into()),
            multibirth: None,
        };
        let m = Model::new(1.0, RateSpec::constant(&[1.0], &[0.0], &[vec![1.0]]), ext).unwrap();
        let ts = m.transitions(&State::from([4])).unwrap();
        let last = ts.last().unwrap();
        assert_eq!(last.kind, TransitionKind::Catastrophe);
        assert_eq!(last.rate, 2.0);
        assert!(is_absorbed(&last.target));
    }

    #[test]
    fn absorption_predicate() {
        assert!(is_absorbed(&State::from([0, 3])));
        assert!(!is_absorbed(&State::from([1, 1])));
        assert!(is_absorbed(&State::from([0, 0])));
    }

    #[test]
    fn empty_competition_sum_is_zero_even_for_small_gamma() {
        let mut rates = RateSpec::constant(&[1.0, 1.0], &[0.0, 0.0], &[vec![1.0, 0.0], vec![0.0, 1.0]]);
        rates.competition[0][0] = Coefficient::callback(|_| 0.0);
        let m = Model::unchecked(0.5, rates, ExtensionSpec::default()).unwrap();
        assert_eq!(m.competition_term(0, &State::from([2, 2])), 0.0);
    }

    #[test]
    fn rejects_non_interior_and_wrong_dimension() {
        let m = Model::constant(1.0, &[1.0], &[0.0], &[vec![1.0]]).unwrap();
        assert!(matches!(
            m.transitions(&State::from([0])),
            Err(QsdError::NotInterior(_))
        ));
        assert!(matches!(
            m.transitions(&State::from([1, 1])),
            Err(QsdError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn rejects_zero_intraspecific_competition() {
        let err = Model::constant(1.0, &[1.0, 1.0], &[0.0, 0.0], &[vec![0.0, 1.0], vec![1.0, 1.0]])
            .unwrap_err();
        match err {
            QsdError::InvalidModel { key, .. } => assert_eq!(key, "model.c[0][0]"),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn rejects_defective_litter_law() {
        let ext = ExtensionSpec {
            catastrophe: None,
            multibirth: Some(MultiBirth::shared(LitterLaw::Finite(vec![
                Litter { k: vec![1], p: 0.5 },
                Litter { k: vec![2], p: 0.4 },
            ]))),
        };
        let err = Model::new(1.0, RateSpec::constant(&[1.0], &[0.0], &[vec![1.0]]), ext).unwrap_err();
        assert!(err.to_string().contains("0.9"), "{err}");
    }

    #[test]
    fn rejects_bad_exponents() {
        assert!(Model::constant(0.0, &[1.0], &[0.0], &[vec![1.0]]).is_err());
        let rates = RateSpec::constant(&[1.0], &[0.0], &[vec![1.0]]).with_exponents(None, Some(1.5));
        assert!(Model::new(1.0, rates, ExtensionSpec::default()).is_err());
    }

    #[test]
    fn overflow_is_reported() {
        let m = Model::constant(1.0, &[1e308], &[0.0], &[vec![1.0]]).unwrap();
        assert!(matches!(
            m.transitions(&State::from([10])),
            Err(QsdError::RateOverflow { .. })
        ));
    }

    #[test]
    fn interior_enumeration() {
        let s = interior_states_up_to(2, 3);
        assert_eq!(s, vec![State::from([1, 1]), State::from([1, 2]), State::from([2, 1])]);
        assert_eq!(interior_states_up_to(2, 1), vec![]);
        assert_eq!(interior_states_up_to(3, 6).len(), 20);
    }

    #[test]
    fn table_clamps_outside_box() {
        let t = RateTable::from_fn(2, 3, |n| (n.coords()[0] * 10 + n.coords()[1]) as f64).unwrap();
        assert_eq!(t.eval(&State::from([2, 3])), 23.0);
        assert_eq!(t.eval(&State::from([7, 1])), 31.0);
    }

    #[test]
    fn family_tag() {
        let mut r = RateSpec::constant(&[1.0], &[0.0], &[vec![1.0]]);
        assert_eq!(r.family(), RateFamily::Constant);
        r.birth[0] = PowerTerm::total(1.0, 0.3).into();
        assert_eq!(r.family(), RateFamily::PowerLaw);
    }
}
