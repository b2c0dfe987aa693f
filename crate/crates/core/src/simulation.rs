//! Exact simulation of the absorbed process, Monte Carlo estimators of the
//! conditioned law and the Q-process.
//!
//! # Random numbers
//!
//! Every variate comes from a ChaCha8 generator (`rand_chacha` 0.3) seeded with
//! `ChaCha8Rng::seed_from_u64(master_seed)` and switched to stream `s` with
//! `set_stream(s)`. Trajectory `i` of a Monte Carlo estimate and particle `i`
//! of a Fleming-Viot system use stream `i`; Fleming-Viot resampling uses
//! stream [`RESAMPLING_STREAM`]. Waiting times are drawn by inversion,
//! `-ln(1 - u) / rate`, and the move by one uniform against the cumulative
//! rates in transition-enumeration order.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid_arg, QsdError, Result};
use crate::model::{Model, State, Transition};
use crate::truncation::{assemble, QsdResult, SubGenerator, TruncatedSpace};

pub const RESAMPLING_STREAM: u64 = u64::MAX;

/// Master seed; `(seed, stream)` determines a generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RngPlan {
    pub seed: u64,
}

impl RngPlan {
    pub const ALGORITHM: &'static str = "ChaCha8 (rand_chacha 0.3), seed_from_u64 + set_stream";

    pub fn new(seed: u64) -> Self {
        RngPlan { seed }
    }

    pub fn stream(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        rng
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Event {
    pub time: f64,
    pub target: State,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Terminal {
    Absorbed { time: f64 },
    Alive { t_max: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub initial: State,
    pub events: Vec<Event>,
    pub terminal: Terminal,
}

impl Trajectory {
    /// State occupied at time `t` (the last event at or before `t`).
    pub fn state_at(&self, t: f64) -> &State {
        let k = self.events.partition_point(|e| e.time <= t);
        if k == 0 {
            &self.initial
        } else {
            &self.events[k - 1].target
        }
    }

    pub fn final_state(&self) -> &State {
        self.events.last().map_or(&self.initial, |e| &e.target)
    }

    pub fn is_absorbed(&self) -> bool {
        matches!(self.terminal, Terminal::Absorbed { .. })
    }

    /// Checks increasing times, legal moves under `model`, and that nothing
    /// happens after absorption. Returns the first violation.
    pub fn validate(&self, model: &Model) -> std::result::Result<(), String> {
        let mut prev_t = 0.0;
        let mut prev = self.initial.clone();
        for (k, e) in self.events.iter().enumerate() {
            if !(e.time > prev_t) && !(k == 0 && e.time >= 0.0) {
                return Err(format!("event {k} at {} does not follow {prev_t}", e.time));
            }
            if !prev.is_interior() {
                return Err(format!("event {k} after absorption in {prev}"));
            }
            let legal = model
                .transitions(&prev)
                .map_err(|err| err.to_string())?
                .iter()
                .any(|t| t.target == e.target);
            if !legal {
                return Err(format!("event {k}: {prev} -> {} is not a move", e.target));
            }
            prev_t = e.time;
            prev = e.target.clone();
        }
        match self.terminal {
            Terminal::Absorbed { time } => {
                if prev.is_interior() || self.events.last().map(|e| e.time) != Some(time) {
                    return Err("absorbed trajectory must end with the absorbing event".into());
                }
            }
            Terminal::Alive { t_max } => {
                if !prev.is_interior() || prev_t > t_max {
                    return Err("alive trajectory ended outside the interior or past t_max".into());
                }
            }
        }
        Ok(())
    }
}

#[inline]
fn exponential(rng: &mut impl Rng, rate: f64) -> f64 {
    let u: f64 = rng.gen();
    -(1.0 - u).ln() / rate
}

/// Index of the move selected by one uniform against cumulative rates.
#[inline]
fn pick(rng: &mut impl Rng, rates: impl Iterator<Item = f64> + Clone, total: f64) -> usize {
    let u: f64 = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (k, r) in rates.enumerate() {
        acc += r;
        last = k;
        if u < acc {
            return k;
        }
    }
    last
}

fn total_of(ts: &[Transition]) -> f64 {
    ts.iter().map(|t| t.rate).sum()
}

/// Gillespie path from `x0` until absorption or `t_max`.
pub fn simulate_path_with<R: Rng>(model: &Model, x0: &State, t_max: f64, rng: &mut R) -> Result<Trajectory> {
    if !(t_max >= 0.0) {
        return Err(invalid_arg("t_max", format!("must be >= 0, got {t_max}")));
    }
    if !x0.is_interior() || x0.dim() != model.dim() {
        return Err(QsdError::NotInterior(x0.clone()));
    }
    let mut events = Vec::new();
    let mut t = 0.0;
    let mut cur = x0.clone();
    let mut buf = Vec::new();
    let terminal = loop {
        model.transitions_into(&cur, &mut buf)?;
        let total = total_of(&buf);
        if total <= 0.0 {
            break Terminal::Alive { t_max };
        }
        let dt = exponential(rng, total);
        if t + dt > t_max {
            break Terminal::Alive { t_max };
        }
        t += dt;
        let k = pick(rng, buf.iter().map(|tr| tr.rate), total);
        cur = buf[k].target.clone();
        events.push(Event {
            time: t,
            target: cur.clone(),
        });
        if !cur.is_interior() {
            break Terminal::Absorbed { time: t };
        }
    };
    let traj = Trajectory {
        initial: x0.clone(),
        events,
        terminal,
    };
    debug_assert_eq!(traj.validate(model), Ok(()));
    Ok(traj)
}

pub fn simulate_path(model: &Model, x0: &State, t_max: f64, plan: &RngPlan, stream: u64) -> Result<Trajectory> {
    simulate_path_with(model, x0, t_max, &mut plan.stream(stream))
}

/// State at time `t` only (no event log); `None` if absorbed before `t`.
fn position_at<R: Rng>(model: &Model, x0: &State, t_end: f64, rng: &mut R) -> Result<Option<State>> {
    let mut t = 0.0;
    let mut cur = x0.clone();
    let mut buf = Vec::new();
    loop {
        model.transitions_into(&cur, &mut buf)?;
        let total = total_of(&buf);
        if total <= 0.0 {
            return Ok(Some(cur));
        }
        t += exponential(rng, total);
        if t > t_end {
            return Ok(Some(cur));
        }
        let k = pick(rng, buf.iter().map(|tr| tr.rate), total);
        cur = buf[k].target.clone();
        if !cur.is_interior() {
            return Ok(None);
        }
    }
}

/// Weighted histogram over states.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalLaw {
    pub weights: BTreeMap<State, f64>,
    pub total_weight: f64,
    pub effective_sample_size: f64,
}

impl EmpiricalLaw {
    pub fn from_counts(counts: BTreeMap<State, u64>) -> Self {
        let n: u64 = counts.values().sum();
        EmpiricalLaw {
            weights: counts.into_iter().map(|(s, c)| (s, c as f64)).collect(),
            total_weight: n as f64,
            effective_sample_size: n as f64,
        }
    }

    /// Normalized masses in state order.
    pub fn normalized(&self) -> Vec<(State, f64)> {
        if self.total_weight <= 0.0 {
            return Vec::new();
        }
        self.weights
            .iter()
            .map(|(s, w)| (s.clone(), w / self.total_weight))
            .collect()
    }

    /// Normalized law as a vector over `space` plus the mass outside it.
    pub fn on_space(&self, space: &TruncatedSpace) -> (Vec<f64>, f64) {
        let mut v = vec![0.0; space.len()];
        let mut outside = 0.0;
        for (s, p) in self.normalized() {
            match space.index_of(&s) {
                Some(i) => v[i] += p,
                None => outside += p,
            }
        }
        (v, outside)
    }

    /// Total variation distance to a probability vector over `space`.
    pub fn tv_to(&self, space: &TruncatedSpace, p: &[f64]) -> f64 {
        let (v, outside) = self.on_space(space);
        0.5 * (v.iter().zip(p).map(|(a, b)| (a - b).abs()).sum::<f64>() + outside)
    }
}

/// Naive-conditioning estimate of `P_x0(X_t in . | t < tau)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalEstimate {
    pub law: EmpiricalLaw,
    pub survivors: usize,
    pub trials: usize,
}

impl ConditionalEstimate {
    pub fn survival(&self) -> f64 {
        self.survivors as f64 / self.trials as f64
    }
}

/// Simulates `n_traj` independent paths (trajectory `i` on stream `i`) and
/// histograms `X_t` over the survivors. Runs on the current rayon pool; the
/// result does not depend on the thread count.
pub fn estimate_conditional(
    model: &Model,
    x0: &State,
    t: f64,
    n_traj: usize,
    plan: &RngPlan,
) -> Result<ConditionalEstimate> {
    if n_traj == 0 {
        return Err(invalid_arg("n_traj", "must be >= 1"));
    }
    if !(t >= 0.0) {
        return Err(invalid_arg("t", format!("must be >= 0, got {t}")));
    }
    if !x0.is_interior() || x0.dim() != model.dim() {
        return Err(QsdError::NotInterior(x0.clone()));
    }
    let counts = (0..n_traj as u64)
        .into_par_iter()
        .map(|i| position_at(model, x0, t, &mut plan.stream(i)))
        .try_fold(BTreeMap::new, |mut acc: BTreeMap<State, u64>, pos| {
            if let Some(s) = pos? {
                *acc.entry(s).or_insert(0) += 1;
            }
            Ok::<_, QsdError>(acc)
        })
        .try_reduce(BTreeMap::new, |mut a, b| {
            for (s, c) in b {
                *a.entry(s).or_insert(0) += c;
            }
            Ok(a)
        })?;
    let survivors = counts.values().sum::<u64>() as usize;
    if survivors == 0 {
        return Err(QsdError::NoSurvivors { trials: n_traj, t });
    }
    Ok(ConditionalEstimate {
        law: EmpiricalLaw::from_counts(counts),
        survivors,
        trials: n_traj,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Clock {
    time: f64,
    particle: usize,
}

impl Eq for Clock {}

impl Ord for Clock {
    // min-heap on (time, particle)
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.particle.cmp(&self.particle))
    }
}

impl PartialOrd for Clock {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Fleming-Viot system summary at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlemingViotRun {
    pub law: EmpiricalLaw,
    pub resamplings: u64,
    pub events: u64,
}

/// `n_particles` copies of the process; an absorbed particle jumps at once to
/// the position of a uniformly chosen other particle. Events are processed one
/// at a time from a queue of per-particle exponential clocks.
pub fn fleming_viot(
    model: &Model,
    x0: &State,
    n_particles: usize,
    t: f64,
    plan: &RngPlan,
) -> Result<FlemingViotRun> {
    if n_particles < 2 {
        return Err(invalid_arg("n_particles", format!("must be >= 2, got {n_particles}")));
    }
    if !(t >= 0.0) {
        return Err(invalid_arg("t", format!("must be >= 0, got {t}")));
    }
    if !x0.is_interior() || x0.dim() != model.dim() {
        return Err(QsdError::NotInterior(x0.clone()));
    }
    let mut states = vec![x0.clone(); n_particles];
    let mut rngs: Vec<ChaCha8Rng> = (0..n_particles as u64).map(|i| plan.stream(i)).collect();
    let mut resample_rng = plan.stream(RESAMPLING_STREAM);
    let mut queue = BinaryHeap::with_capacity(n_particles);
    let mut buf = Vec::new();
    for (i, rng) in rngs.iter_mut().enumerate() {
        let total = model.total_rate(&states[i])?;
        if total > 0.0 {
            queue.push(Clock {
                time: exponential(rng, total),
                particle: i,
            });
        }
    }
    let (mut events, mut resamplings) = (0u64, 0u64);
    while let Some(clock) = queue.pop() {
        if clock.time > t {
            break;
        }
        let i = clock.particle;
        model.transitions_into(&states[i], &mut buf)?;
        let total = total_of(&buf);
        let k = pick(&mut rngs[i], buf.iter().map(|tr| tr.rate), total);
        events += 1;
        if buf[k].target.is_interior() {
            states[i] = buf[k].target.clone();
        } else {
            let mut j = resample_rng.gen_range(0..n_particles - 1);
            if j >= i {
                j += 1;
            }
            states[i] = states[j].clone();
            resamplings += 1;
        }
        let total = model.total_rate(&states[i])?;
        if total > 0.0 {
            queue.push(Clock {
                time: clock.time + exponential(&mut rngs[i], total),
                particle: i,
            });
        }
    }
    let mut counts = BTreeMap::new();
    for s in states {
        *counts.entry(s).or_insert(0u64) += 1;
    }
    Ok(FlemingViotRun {
        law: EmpiricalLaw::from_counts(counts),
        resamplings,
        events,
    })
}

/// h-transformed generator on a truncated space:
/// `r^Q(x, y) = q(x, y) eta(y) / eta(x)`, diagonal `q(x, x) + lambda0`.
#[derive(Debug, Clone)]
pub struct QProcessGenerator {
    rows: Vec<Vec<(usize, f64)>>,
    diag: Vec<f64>,
}

impl QProcessGenerator {
    pub fn new(q: &SubGenerator, qsd: &QsdResult) -> Result<Self> {
        if qsd.eta.len() != q.len() {
            return Err(invalid_arg("qsd", "eigenfunction and sub-generator sizes differ"));
        }
        let eta = &qsd.eta;
        let rows = (0..q.len())
            .map(|i| q.row(i).map(|(j, v)| (j, v * eta[j] / eta[i])).collect())
            .collect();
        let diag = q.diag().iter().map(|d| d + qsd.lambda0).collect();
        Ok(QProcessGenerator { rows, diag })
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    /// Row sums; zero up to the eigen-residual of `eta`.
    pub fn row_sums(&self) -> Vec<f64> {
        self.rows
            .iter()
            .zip(&self.diag)
            .map(|(r, d)| d + r.iter().map(|(_, v)| v).sum::<f64>())
            .collect()
    }
}

/// Simulates the Q-process on `space` from `x0` up to `t_max`. Moves leaving
/// the space or into the absorbing set are suppressed (their `eta` is 0).
pub fn simulate_qprocess(
    model: &Model,
    qsd: &QsdResult,
    space: &TruncatedSpace,
    x0: &State,
    t_max: f64,
    plan: &RngPlan,
    stream: u64,
) -> Result<Trajectory> {
    let q = assemble(model, space)?;
    let gen = QProcessGenerator::new(&q, qsd)?;
    simulate_qprocess_on(&gen, space, x0, t_max, &mut plan.stream(stream))
}

pub fn simulate_qprocess_on<R: Rng>(
    gen: &QProcessGenerator,
    space: &TruncatedSpace,
    x0: &State,
    t_max: f64,
    rng: &mut R,
) -> Result<Trajectory> {
    if !(t_max >= 0.0) {
        return Err(invalid_arg("t_max", format!("must be >= 0, got {t_max}")));
    }
    let mut cur = space.require_index(x0)?;
    let mut t = 0.0;
    let mut events = Vec::new();
    loop {
        let row = gen.row(cur);
        let total: f64 = row.iter().map(|(_, v)| v).sum();
        if total <= 0.0 {
            break;
        }
        let dt = exponential(rng, total);
        if t + dt > t_max {
            break;
        }
        t += dt;
        let k = pick(rng, row.iter().map(|(_, v)| *v), total);
        cur = row[k].0;
        events.push(Event {
            time: t,
            target: space.state(cur).clone(),
        });
    }
    Ok(Trajectory {
        initial: x0.clone(),
        events,
        terminal: Terminal::Alive { t_max },
    })
}

/// Fraction of `[0, t_max]` spent in each state.
pub fn occupation_measure(traj: &Trajectory, t_max: f64) -> EmpiricalLaw {
    let mut weights: BTreeMap<State, f64> = BTreeMap::new();
    let mut t = 0.0;
    let mut cur = &traj.initial;
    for e in &traj.events {
        *weights.entry(cur.clone()).or_insert(0.0) += e.time - t;
        t = e.time;
        cur = &e.target;
    }
    *weights.entry(cur.clone()).or_insert(0.0) += t_max - t;
    let total: f64 = weights.values().sum();
    let sq: f64 = weights.values().map(|w| w * w).sum();
    EmpiricalLaw {
        weights,
        total_weight: total,
        effective_sample_size: if sq > 0.0 { total * total / sq } else { 0.0 },
    }
}
