//! Finite-range sweeps over `{n interior : |n| <= N}`.
//!
//! One type is swept exhaustively. In higher dimension every level up to
//! [`DENSE_LEVELS`] is visited, then levels grow geometrically; a level with at
//! most [`FULL_LEVEL_LIMIT`] states is enumerated, a larger one is represented
//! by its corners, boundary-adjacent and balanced states plus seeded random
//! compositions.

use std::collections::BTreeSet;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

use crate::model::State;

pub(crate) const DENSE_LEVELS: u64 = 256;
pub(crate) const FULL_LEVEL_LIMIT: u64 = 512;
const RANDOM_PER_LEVEL: usize = 64;
const LEVEL_GROWTH: f64 = 1.02;
const SWEEP_SEED: u64 = 0x5eed;

/// Levels `|n|` visited by a sweep up to `n_check`, increasing.
pub fn sweep_levels(dim: usize, n_check: u64) -> Vec<u64> {
    let first = dim as u64;
    if n_check < first {
        return Vec::new();
    }
    if dim == 1 {
        return (1..=n_check).collect();
    }
    let mut out: Vec<u64> = (first..=n_check.min(DENSE_LEVELS.max(first))).collect();
    let mut s = *out.last().unwrap();
    while s < n_check {
        s = ((s as f64 * LEVEL_GROWTH).ceil() as u64).max(s + 1).min(n_check);
        out.push(s);
    }
    out
}

/// Number of interior states with `|n| = s`, saturating.
fn level_count(dim: usize, s: u64) -> u64 {
    // C(s - 1, dim - 1)
    let (n, k) = (s - 1, dim as u64 - 1);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * (n - i) as u128 / (i + 1) as u128;
        if c > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    c as u64
}

fn compositions(dim: usize, s: u64, prefix: &mut Vec<u64>, out: &mut Vec<State>) {
    if prefix.len() == dim - 1 {
        prefix.push(s);
        out.push(State::new(prefix.clone()));
        prefix.pop();
        return;
    }
    let left = (dim - 1 - prefix.len()) as u64;
    for x in 1..=(s - left) {
        prefix.push(x);
        compositions(dim, s - x, prefix, out);
        prefix.pop();
    }
}

fn balanced(parts: usize, s: u64) -> Vec<u64> {
    let q = s / parts as u64;
    let extra = (s % parts as u64) as usize;
    (0..parts).map(|i| q + u64::from(i < extra)).collect()
}

/// States checked at level `s`, in lexicographic order.
pub fn sweep_states(dim: usize, s: u64) -> Vec<State> {
    if s < dim as u64 {
        return Vec::new();
    }
    if level_count(dim, s) <= FULL_LEVEL_LIMIT {
        let mut out = Vec::new();
        compositions(dim, s, &mut Vec::with_capacity(dim), &mut out);
        return out;
    }
    let mut set = BTreeSet::new();
    for i in 0..dim {
        let mut c = vec![1u64; dim];
        c[i] = s - dim as u64 + 1;
        set.insert(State::new(c));
        let rest = balanced(dim - 1, s - 1);
        let mut c = Vec::with_capacity(dim);
        c.extend_from_slice(&rest[..i]);
        c.push(1);
        c.extend_from_slice(&rest[i..]);
        set.insert(State::new(c));
    }
    set.insert(State::new(balanced(dim, s)));
    let mut rng = ChaCha8Rng::seed_from_u64(SWEEP_SEED);
    rng.set_stream(s);
    for _ in 0..RANDOM_PER_LEVEL {
        let mut cuts = BTreeSet::new();
        while cuts.len() < dim - 1 {
            cuts.insert(rng.gen_range(1..s));
        }
        let mut prev = 0;
        let mut c = Vec::with_capacity(dim);
        for x in cuts {
            c.push(x - prev);
            prev = x;
        }
        c.push(s - prev);
        set.insert(State::new(c));
    }
    set.into_iter().collect()
}

/// Least-squares slope and intercept of `y` against `x`.
pub(crate) fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (slope, my - slope * mx)
}

/// Log-log slope of positive `values` against `levels` on the top decade.
pub(crate) fn top_decade_slope(levels: &[u64], values: &[f64]) -> Option<f64> {
    let top = *levels.last()?;
    let (x, y): (Vec<f64>, Vec<f64>) = levels
        .iter()
        .zip(values)
        .filter(|(s, v)| **s as f64 >= top as f64 / 10.0 && **v > 0.0 && v.is_finite())
        .map(|(s, v)| ((*s as f64).ln(), v.ln()))
        .unzip();
    if x.len() < 2 {
        return None;
    }
    Some(linear_fit(&x, &y).0)
}

/// Whether the per-bin extremum over the top half (8 geometric bins) moves in
/// the requested direction, up to a relative tolerance of `1e-9`.
pub(crate) fn monotone_top_half(levels: &[u64], values: &[f64], increasing: bool) -> bool {
    let Some(&top) = levels.last() else {
        return false;
    };
    let lo = top as f64 / 2.0;
    let bins = 8;
    let mut ext: Vec<Option<f64>> = vec![None; bins];
    for (s, v) in levels.iter().zip(values) {
        let s = *s as f64;
        if s < lo {
            continue;
        }
        let b = if top as f64 > lo {
            (((s / lo).ln() / 2f64.ln()) * bins as f64).floor() as usize
        } else {
            0
        }
        .min(bins - 1);
        ext[b] = Some(match ext[b] {
            None => *v,
            Some(e) if increasing => e.min(*v),
            Some(e) => e.max(*v),
        });
    }
    let seq: Vec<f64> = ext.into_iter().flatten().collect();
    seq.windows(2).all(|w| {
        let tol = 1e-9 * w[0].abs().max(w[1].abs());
        if increasing {
            w[1] >= w[0] - tol
        } else {
            w[1] <= w[0] + tol
        }
    })
}

/// Log-log slopes below this in magnitude count as a bounded (flat) ratio.
pub(crate) const FLAT_SLOPE: f64 = 0.05;
