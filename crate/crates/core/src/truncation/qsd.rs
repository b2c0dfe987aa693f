use serde::Serialize;

use super::SubGenerator;
use crate::error::{QsdError, Result};

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: usize = 1_000_000;
/// Factor above `tol` at which the sweep estimate hands over to the direct residual.
pub const DIRECT_CHECK: f64 = 1e4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverOptions {
    /// Stop when the L1 residual of the eigen-identity drops below this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

/// Quasi-stationary distribution `alpha`, extinction rate `lambda0` and right
/// eigenfunction `eta` (normalized so that `alpha . eta = 1`).
#[derive(Debug, Clone, Serialize)]
pub struct QsdResult {
    pub alpha: Vec<f64>,
    pub lambda0: f64,
    pub eta: Vec<f64>,
    /// `|| alpha Q + lambda0 alpha ||_1`
    pub left_residual: f64,
    /// `|| Q eta + lambda0 eta ||_1 / || eta ||_1`
    pub right_residual: f64,
    pub iterations: usize,
    /// The iteration stopped at its rounding floor above `tol`; the residuals
    /// above are what it reached.
    pub rounding_floor: bool,
}

impl QsdResult {
    /// Stationary law of the Q-process: `alpha_x eta_x`, which sums to 1.
    pub fn qprocess_stationary(&self) -> Vec<f64> {
        self.alpha.iter().zip(&self.eta).map(|(a, e)| a * e).collect()
    }
}

/// Power iteration on `P = I + Q / Lambda`.
///
/// The left iteration renormalizes in L1 every sweep. Since
/// `|alpha P|_1 = 1 - lambda0(alpha) / Lambda`, the L1 residual of
/// `alpha Q + lambda0 alpha` equals `Lambda |alpha P|_1 |alpha' - alpha|_1`,
/// i.e. `2 Lambda |alpha P|_1` times the TV change of the sweep. That estimate
/// carries rounding of order `Lambda` machine epsilons, so once it is within
/// [`DIRECT_CHECK`] of `tol` the residual is recomputed from `Q` itself, and
/// the sweeps continue until it stops improving. The result must reach `tol`;
/// when `Lambda` is large against the spectral gap the floor can lie above
/// `tol`, and the best iterate is then returned with `rounding_floor` set.
/// `lambda0 = sum_x alpha_x kill_x = -(alpha Q) 1`.
pub fn solve_qsd(q: &SubGenerator, opts: SolverOptions) -> Result<QsdResult> {
    if !(opts.tol > 0.0) {
        return Err(crate::error::invalid_arg("tol", "must be > 0"));
    }
    let n = q.len();
    if let Some(i) = q.reducibility_witness() {
        return Err(QsdError::Reducible(q.space().state(i).clone()));
    }
    if n == 1 {
        let lambda0 = -q.diag()[0];
        return Ok(QsdResult {
            alpha: vec![1.0],
            lambda0,
            eta: vec![1.0],
            left_residual: 0.0,
            right_residual: 0.0,
            iterations: 0,
            rounding_floor: false,
        });
    }
    let lam = q.uniformization();
    let mut next = vec![0.0; n];
    let mut buf = vec![0.0; n];

    let mut alpha = vec![1.0 / n as f64; n];
    let mut left = Floor::new(opts.tol);
    while left.iterations < opts.max_iter {
        q.left_step(&alpha, &mut next);
        let mass: f64 = next.iter().sum();
        let inv = 1.0 / mass;
        let mut diff = 0.0;
        for (a, x) in alpha.iter_mut().zip(next.iter()) {
            let v = x * inv;
            diff += (v - *a).abs();
            *a = v;
        }
        let done = left.record(lam * mass * diff, &alpha, |a| {
            left_residual(q, a, mass_leak(q, a), &mut buf)
        });
        if done {
            break;
        }
    }
    let left_iters = left.iterations;
    let (alpha, left_floor) = left.finish()?;
    let lambda0 = mass_leak(q, &alpha);

    // right eigenvector, normalized alpha . eta = 1 every sweep
    let mut eta = vec![1.0; n];
    let mut right = Floor::new(opts.tol);
    while right.iterations < opts.max_iter {
        q.right_step(&eta, &mut next);
        let scale: f64 = alpha.iter().zip(&next).map(|(a, e)| a * e).sum();
        let inv = 1.0 / scale;
        let mut diff = 0.0;
        let mut norm = 0.0;
        for (e, x) in eta.iter_mut().zip(next.iter()) {
            let v = x * inv;
            diff += (v - *e).abs();
            norm += v.abs();
            *e = v;
        }
        let done = right.record(lam * scale * diff / norm, &eta, |e| {
            right_residual(q, e, lambda0, &mut buf)
        });
        if done {
            break;
        }
    }
    let iterations = left_iters.max(right.iterations);
    let (eta, right_floor) = right.finish()?;

    Ok(QsdResult {
        left_residual: left_residual(q, &alpha, lambda0, &mut buf),
        right_residual: right_residual(q, &eta, lambda0, &mut buf),
        alpha,
        lambda0,
        eta,
        iterations,
        rounding_floor: left_floor || right_floor,
    })
}

/// Stopping state of one power iteration. Below `tol * DIRECT_CHECK` the
/// residual is recomputed from `Q` and the best iterate is kept. Iteration goes
/// on, past `tol` if need be, until the direct residual fails to halve within
/// a quarter of the sweeps done so far (at least [`MIN_STALL`]): rounding has
/// then taken over. The best iterate is returned; it is flagged when even the
/// floor lies above `tol`.
struct Floor {
    tol: f64,
    iterations: usize,
    residual: f64,
    best: Option<(f64, Vec<f64>)>,
    marker: f64,
    stall: usize,
    stalled: bool,
}

/// Shortest stagnation window, in sweeps.
pub const MIN_STALL: usize = 1000;

impl Floor {
    fn new(tol: f64) -> Self {
        Floor {
            tol,
            iterations: 0,
            residual: f64::INFINITY,
            best: None,
            marker: f64::INFINITY,
            stall: 0,
            stalled: false,
        }
    }

    fn record(&mut self, estimate: f64, x: &[f64], direct: impl FnOnce(&[f64]) -> f64) -> bool {
        self.iterations += 1;
        self.residual = estimate;
        if estimate > self.tol * DIRECT_CHECK {
            return false;
        }
        let r = direct(x);
        self.residual = r;
        if self.best.as_ref().is_none_or(|b| r < b.0) {
            self.best = Some((r, x.to_vec()));
        }
        if r < 0.5 * self.marker {
            self.marker = r;
            self.stall = 0;
        } else {
            self.stall += 1;
        }
        self.stalled = self.stall >= MIN_STALL.max(self.iterations / 4);
        self.stalled
    }

    fn finish(self) -> Result<(Vec<f64>, bool)> {
        match self.best {
            Some((r, x)) if r <= self.tol => Ok((x, false)),
            Some((_, x)) if self.stalled => Ok((x, true)),
            _ => Err(QsdError::IterationLimit {
                iterations: self.iterations,
                residual: self.residual,
            }),
        }
    }
}

/// `-(mu Q) 1 = sum_x mu_x kill_x`: rate at which mass leaves under `mu`.
pub fn mass_leak(q: &SubGenerator, mu: &[f64]) -> f64 {
    mu.iter().enumerate().map(|(i, m)| m * q.killing(i)).sum()
}

fn left_residual(q: &SubGenerator, alpha: &[f64], lambda0: f64, buf: &mut [f64]) -> f64 {
    q.left_mul(alpha, buf);
    buf.iter().zip(alpha).map(|(x, a)| (x + lambda0 * a).abs()).sum()
}

fn right_residual(q: &SubGenerator, eta: &[f64], lambda0: f64, buf: &mut [f64]) -> f64 {
    q.right_mul(eta, buf);
    let norm: f64 = eta.iter().map(|e| e.abs()).sum();
    buf.iter().zip(eta).map(|(x, e)| (x + lambda0 * e).abs()).sum::<f64>() / norm
}
