use std::collections::HashSet;

use super::banded::BandMatrix;
use super::{assemble, TruncatedSpace};
use crate::error::{invalid_arg, Result};
use crate::model::{Model, State};

/// `u(n) = E_n(tau_G ^ tau_absorbed)` on the truncated chain (leaving the
/// truncation counts as absorption). Solves `Q u = -1` off `G` with `u = 0` on
/// `G`. Entries are indexed like `space`.
pub fn expected_hitting_time(model: &Model, space: &TruncatedSpace, g: &[State]) -> Result<Vec<f64>> {
    if g.is_empty() {
        return Err(invalid_arg("G", "target set must be nonempty"));
    }
    let mut in_g = vec![false; space.len()];
    for s in g {
        in_g[space.require_index(s)?] = true;
    }
    solve_off_target(model, space, &in_g)
}

/// Hitting time of `G = {m : |m| <= k}`.
pub fn expected_hitting_time_of_level(model: &Model, space: &TruncatedSpace, k: u64) -> Result<Vec<f64>> {
    let in_g: Vec<bool> = space.states().iter().map(|s| s.size() <= k).collect();
    if !in_g.iter().any(|&b| b) {
        return Err(invalid_arg("k", format!("no state with |m| <= {k}")));
    }
    solve_off_target(model, space, &in_g)
}

fn solve_off_target(model: &Model, space: &TruncatedSpace, in_g: &[bool]) -> Result<Vec<f64>> {
    let q = assemble(model, space)?;
    let free: Vec<usize> = (0..space.len()).filter(|&i| !in_g[i]).collect();
    let mut out = vec![0.0; space.len()];
    if free.is_empty() {
        return Ok(out);
    }
    let mut local = vec![usize::MAX; space.len()];
    for (k, &i) in free.iter().enumerate() {
        local[i] = k;
    }
    let free_set: HashSet<usize> = free.iter().copied().collect();
    let (mut lower, mut upper) = (0usize, 0usize);
    for (k, &i) in free.iter().enumerate() {
        for (j, _) in q.row(i) {
            if free_set.contains(&j) {
                let l = local[j];
                if l < k {
                    lower = lower.max(k - l);
                } else {
                    upper = upper.max(l - k);
                }
            }
        }
    }
    // -Q restricted to the free states
    let mut a = BandMatrix::new(free.len(), lower, upper);
    for (k, &i) in free.iter().enumerate() {
        a.add(k, k, -q.diag()[i]);
        for (j, v) in q.row(i) {
            if local[j] != usize::MAX {
                a.add(k, local[j], -v);
            }
        }
    }
    let mut rhs = vec![1.0; free.len()];
    a.solve(&mut rhs)?;
    for (k, &i) in free.iter().enumerate() {
        out[i] = rhs[k];
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::truncation::enumerate_space;

    fn logistic() -> Model {
        Model::constant(1.0, &[1.0], &[0.0], &[vec![1.0]]).unwrap()
    }

    #[test]
    fn single_free_state_is_exponential_clock() {
        let space = enumerate_space(1, 2).unwrap();
        let u = expected_hitting_time(&logistic(), &space, &[State::from([1])]).unwrap();
        // state 2 exits at total rate 6
        assert_eq!(u[0], 0.0);
        assert!((u[1] - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn whole_space_target() {
        let space = enumerate_space(2, 6).unwrap();
        let m = Model::constant(1.0, &[1.0, 1.0], &[0.0, 0.0], &[vec![1.0, 0.1], vec![0.1, 1.0]])
            .unwrap();
        let u = expected_hitting_time(&m, &space, space.states()).unwrap();
        assert!(u.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn solves_two_dimensional_system() {
        // compare against plain Gauss-Seidel on the same system
        let space = enumerate_space(2, 10).unwrap();
        let m = Model::constant(1.0, &[2.0, 1.0], &[0.1, 0.0], &[vec![1.0, 0.3], vec![0.2, 1.0]])
            .unwrap();
        let u = expected_hitting_time_of_level(&m, &space, 3).unwrap();
        let q = assemble(&m, &space).unwrap();
        let mut v = vec![0.0; space.len()];
        for _ in 0..5000 {
            for i in 0..space.len() {
                if space.state(i).size() <= 3 {
                    continue;
                }
                let s: f64 = q.row(i).map(|(j, r)| r * v[j]).sum();
                v[i] = (1.0 + s) / -q.diag()[i];
            }
        }
        for (a, b) in u.iter().zip(&v) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn supremum_decreases_with_level() {
        let m = logistic();
        let space = enumerate_space(1, 80).unwrap();
        let sup = |k| {
            expected_hitting_time_of_level(&m, &space, k)
                .unwrap()
                .into_iter()
                .fold(0.0f64, f64::max)
        };
        let (a, b) = (sup(5), sup(10));
        assert!(b < a, "{b} !< {a}");
    }

    #[test]
    fn rejects_empty_target() {
        let space = enumerate_space(1, 5).unwrap();
        assert!(expected_hitting_time(&logistic(), &space, &[]).is_err());
        assert!(expected_hitting_time(&logistic(), &space, &[State::from([9])]).is_err());
    }
}
