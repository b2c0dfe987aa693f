//! Finite interior truncation `{n in N^r : |n| <= N}` and the killed
//! sub-generator on it.
//!
//! Mass that leaves the truncation, or enters the absorbing set, is killed:
//! the diagonal entry of every row is `-total_rate(n)` regardless of where the
//! move lands, so every row sum is `<= 0`.

mod banded;
mod hitting;
mod qsd;
mod transient;

use std::collections::{HashMap, VecDeque};

pub use hitting::{expected_hitting_time, expected_hitting_time_of_level};
pub use qsd::{solve_qsd, QsdResult, SolverOptions, DEFAULT_MAX_ITER, DEFAULT_TOL};
pub use transient::{
    backward, survival_probability, transient_conditional, Propagator, POISSON_TAIL,
    SURVIVAL_FLOOR,
};

use crate::error::{QsdError, Result};
use crate::model::{interior_states_up_to, Model, State};

/// Ratio between the uniformization constant and the largest exit rate.
pub const UNIFORMIZATION_FACTOR: f64 = 1.05;

/// Interior states with `|n| <= level` in lexicographic order.
#[derive(Debug, Clone)]
pub struct TruncatedSpace {
    dim: usize,
    level: u64,
    states: Vec<State>,
    index: HashMap<State, usize>,
}

impl TruncatedSpace {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn level(&self) -> u64 {
        self.level
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn state(&self, i: usize) -> &State {
        &self.states[i]
    }

    pub fn index_of(&self, n: &State) -> Option<usize> {
        self.index.get(n).copied()
    }

    pub fn require_index(&self, n: &State) -> Result<usize> {
        self.index_of(n)
            .ok_or_else(|| QsdError::OutsideSpace(n.clone()))
    }

    /// States on the outer layer `|n| = level`, from which a single birth
    /// leaves the truncation.
    pub fn outer_layer(&self) -> impl Iterator<Item = usize> + '_ {
        self.states
            .iter()
            .enumerate()
            .filter(move |(_, s)| s.size() == self.level)
            .map(|(i, _)| i)
    }

    /// Point mass at `n` as a probability vector over the space.
    pub fn point_mass(&self, n: &State) -> Result<Vec<f64>> {
        let i = self.require_index(n)?;
        let mut v = vec![0.0; self.len()];
        v[i] = 1.0;
        Ok(v)
    }
}

/// All interior states with `|n| <= level`.
pub fn enumerate_space(dim: usize, level: u64) -> Result<TruncatedSpace> {
    if dim == 0 || level < dim as u64 {
        return Err(QsdError::EmptySpace { dim, level });
    }
    let states = interior_states_up_to(dim, level);
    let index = states
        .iter()
        .enumerate()
        .map(|(i, s)| (s.clone(), i))
        .collect();
    Ok(TruncatedSpace {
        dim,
        level,
        states,
        index,
    })
}

/// Killed sub-generator `Q` on a truncated space, stored by rows (row = source).
#[derive(Debug, Clone)]
pub struct SubGenerator {
    space: TruncatedSpace,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    diag: Vec<f64>,
    to_absorbed: Vec<f64>,
    to_outside: Vec<f64>,
    uniformization: f64,
}

/// Builds `Q` for `model` on `space`.
pub fn assemble(model: &Model, space: &TruncatedSpace) -> Result<SubGenerator> {
    if model.dim() != space.dim() {
        return Err(QsdError::InvalidArgument {
            name: "space".into(),
            reason: format!(
                "space dimension {} differs from model dimension {}",
                space.dim(),
                model.dim()
            ),
        });
    }
    let n = space.len();
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    let mut diag = Vec::with_capacity(n);
    let mut to_absorbed = Vec::with_capacity(n);
    let mut to_outside = Vec::with_capacity(n);
    let mut buf = Vec::new();
    let mut row: Vec<(usize, f64)> = Vec::new();
    row_ptr.push(0);
    for s in space.states() {
        model.transitions_into(s, &mut buf)?;
        row.clear();
        let mut total = 0.0;
        let mut absorbed = 0.0;
        let mut outside = 0.0;
        for t in &buf {
            total += t.rate;
            if !t.target.is_interior() {
                absorbed += t.rate;
            } else if let Some(j) = space.index_of(&t.target) {
                row.push((j, t.rate));
            } else {
                outside += t.rate;
            }
        }
        // stable sort keeps transition order among duplicates
        row.sort_by_key(|&(j, _)| j);
        let mut k = 0;
        while k < row.len() {
            let j = row[k].0;
            let mut v = 0.0;
            while k < row.len() && row[k].0 == j {
                v += row[k].1;
                k += 1;
            }
            cols.push(j);
            vals.push(v);
        }
        row_ptr.push(cols.len());
        diag.push(-total);
        to_absorbed.push(absorbed);
        to_outside.push(outside);
    }
    let max_exit = diag.iter().fold(0.0f64, |m, d| m.max(-d));
    Ok(SubGenerator {
        space: space.clone(),
        row_ptr,
        cols,
        vals,
        diag,
        to_absorbed,
        to_outside,
        uniformization: UNIFORMIZATION_FACTOR * max_exit,
    })
}

impl SubGenerator {
    /// Builds a sub-generator directly from a dense matrix over `space`.
    /// Off-diagonal entries must be `>= 0` and row sums `<= 0`; the deficit is
    /// booked as absorption.
    pub fn from_dense(space: TruncatedSpace, q: &[Vec<f64>]) -> Result<Self> {
        let n = space.len();
        if q.len() != n || q.iter().any(|r| r.len() != n) {
            return Err(QsdError::InvalidArgument {
                name: "q".into(),
                reason: format!("expected a {n}x{n} matrix"),
            });
        }
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        let mut diag = Vec::new();
        let mut to_absorbed = Vec::new();
        for (i, r) in q.iter().enumerate() {
            let mut off = 0.0;
            for (j, &v) in r.iter().enumerate() {
                if i == j {
                    continue;
                }
                if v < 0.0 {
                    return Err(QsdError::InvalidArgument {
                        name: format!("q[{i}][{j}]"),
                        reason: format!("off-diagonal entry must be >= 0, got {v}"),
                    });
                }
                if v > 0.0 {
                    cols.push(j);
                    vals.push(v);
                    off += v;
                }
            }
            let kill = -r[i] - off;
            if kill < -1e-12 * off.max(1.0) {
                return Err(QsdError::InvalidArgument {
                    name: format!("q[{i}]"),
                    reason: format!("row sum must be <= 0, got {}", -kill),
                });
            }
            row_ptr.push(cols.len());
            diag.push(r[i]);
            to_absorbed.push(kill.max(0.0));
        }
        let max_exit = diag.iter().fold(0.0f64, |m, d| m.max(-d));
        Ok(SubGenerator {
            space,
            row_ptr,
            cols,
            vals,
            diag,
            to_outside: vec![0.0; n],
            to_absorbed,
            uniformization: UNIFORMIZATION_FACTOR * max_exit,
        })
    }

    pub fn space(&self) -> &TruncatedSpace {
        &self.space
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    /// Uniformization constant `1.05 * max_n |q_nn|`.
    pub fn uniformization(&self) -> f64 {
        self.uniformization
    }

    /// Off-diagonal entries `(column, rate)` of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    /// Killing rate of row `i`: `-(row sum)`.
    pub fn killing(&self, i: usize) -> f64 {
        self.to_absorbed[i] + self.to_outside[i]
    }

    /// Rate from state `i` into the absorbing set.
    pub fn absorption_rate(&self, i: usize) -> f64 {
        self.to_absorbed[i]
    }

    /// Rate from state `i` to interior states beyond the truncation.
    pub fn escape_rate(&self, i: usize) -> f64 {
        self.to_outside[i]
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.diag[i] + self.row(i).map(|(_, v)| v).sum::<f64>()
    }

    /// Entry `q_ij` (dense lookup, for tests and small examples).
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return self.diag[i];
        }
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        let mut d = vec![vec![0.0; n]; n];
        for (i, row) in d.iter_mut().enumerate() {
            row[i] = self.diag[i];
            for (j, v) in self.row(i) {
                row[j] += v;
            }
        }
        d
    }

    /// `y = x Q` (row vector times matrix).
    pub fn left_mul(&self, x: &[f64], y: &mut [f64]) {
        for (yi, (xi, di)) in y.iter_mut().zip(x.iter().zip(&self.diag)) {
            *yi = xi * di;
        }
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                y[self.cols[k]] += xi * self.vals[k];
            }
        }
    }

    /// `y = Q x` (matrix times column vector).
    pub fn right_mul(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = self.diag[i] * x[i];
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *yi = acc;
        }
    }

    /// `y = x P` with `P = I + Q / Lambda`.
    pub(crate) fn left_step(&self, x: &[f64], y: &mut [f64]) {
        let inv = 1.0 / self.uniformization;
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = x[i] * (1.0 + self.diag[i] * inv);
        }
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let w = xi * inv;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                y[self.cols[k]] += w * self.vals[k];
            }
        }
    }

    /// `y = P x` with `P = I + Q / Lambda`.
    pub(crate) fn right_step(&self, x: &[f64], y: &mut [f64]) {
        let inv = 1.0 / self.uniformization;
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *yi = x[i] * (1.0 + self.diag[i] * inv) + acc * inv;
        }
    }

    /// First state that cannot reach, or be reached from, state 0.
    pub(crate) fn reducibility_witness(&self) -> Option<usize> {
        let n = self.len();
        if n <= 1 {
            return None;
        }
        let mut fwd = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        fwd[0] = true;
        while let Some(i) = queue.pop_front() {
            for (j, v) in self.row(i) {
                if v > 0.0 && !fwd[j] {
                    fwd[j] = true;
                    queue.push_back(j);
                }
            }
        }
        if let Some(i) = fwd.iter().position(|&b| !b) {
            return Some(i);
        }
        let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
        for i in 0..n {
            for (j, v) in self.row(i) {
                if v > 0.0 {
                    preds[j].push(i);
                }
            }
        }
        let mut bwd = vec![false; n];
        bwd[0] = true;
        queue.push_back(0);
        while let Some(j) = queue.pop_front() {
            for &i in &preds[j] {
                if !bwd[i] {
                    bwd[i] = true;
                    queue.push_back(i);
                }
            }
        }
        bwd.iter().position(|&b| !b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn logistic_1d() -> Model {
        Model::constant(1.0, &[1.0], &[0.0], &[vec![1.0]]).unwrap()
    }

    #[test]
    fn enumeration_examples() {
        let s = enumerate_space(2, 2).unwrap();
        assert_eq!(s.states(), &[State::from([1, 1])]);
        let s = enumerate_space(1, 3).unwrap();
        assert_eq!(s.states(), &[State::from([1]), State::from([2]), State::from([3])]);
        let s = enumerate_space(2, 3).unwrap();
        assert_eq!(
            s.states(),
            &[State::from([1, 1]), State::from([1, 2]), State::from([2, 1])]
        );
        assert!(matches!(enumerate_space(3, 2), Err(QsdError::EmptySpace { .. })));
    }

    #[test]
    fn index_round_trips() {
        let s = enumerate_space(3, 9).unwrap();
        for (i, st) in s.states().iter().enumerate() {
            assert_eq!(s.index_of(st), Some(i));
            assert!(st.is_interior());
        }
        assert!(s.states().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn two_state_generator() {
        let q = assemble(&logistic_1d(), &enumerate_space(1, 2).unwrap()).unwrap();
        assert_eq!(q.to_dense(), vec![vec![-2.0, 1.0], vec![4.0, -6.0]]);
        assert!((q.uniformization() - 6.3).abs() < 1e-12);
        assert_eq!(q.absorption_rate(0), 1.0);
        assert_eq!(q.escape_rate(1), 2.0);
    }

    #[test]
    fn single_state_generator() {
        let q = assemble(&logistic_1d(), &enumerate_space(1, 1).unwrap()).unwrap();
        assert_eq!(q.to_dense(), vec![vec![-2.0]]);
    }

    #[test]
    fn rows_are_sub_markovian() {
        let m = Model::constant(
            1.0,
            &[2.0, 1.5],
            &[0.1, 0.0],
            &[vec![1.0, 0.2], vec![0.3, 0.8]],
        )
        .unwrap();
        let space = enumerate_space(2, 15).unwrap();
        let q = assemble(&m, &space).unwrap();
        for i in 0..q.len() {
            assert!(q.row_sum(i) <= 1e-12);
            let s = space.state(i);
            if s.coords().contains(&1) || s.size() == 15 {
                assert!(q.row_sum(i) < 0.0, "row {s} should leak");
            }
        }
    }

    #[test]
    fn assembly_is_deterministic() {
        let m = Model::constant(0.5, &[1.0, 2.0], &[0.0, 0.1], &[vec![1.0, 0.5], vec![0.5, 1.0]])
            .unwrap();
        let space = enumerate_space(2, 12).unwrap();
        let a = assemble(&m, &space).unwrap();
        let b = assemble(&m, &space).unwrap();
        assert_eq!(a.row_ptr, b.row_ptr);
        assert_eq!(a.cols, b.cols);
        assert!(a.vals.iter().zip(&b.vals).all(|(x, y)| x.to_bits() == y.to_bits()));
        assert!(a.diag.iter().zip(&b.diag).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let space = enumerate_space(2, 4).unwrap();
        assert!(assemble(&logistic_1d(), &space).is_err());
    }
}
