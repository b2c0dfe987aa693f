//! Transient laws `mu0 exp(tQ)` and `exp(tQ) f` by uniformization.

use super::SubGenerator;
use crate::error::{invalid_arg, QsdError, Result};

/// Poisson mass dropped from the right tail.
pub const POISSON_TAIL: f64 = 1e-14;
/// Survival below this makes conditioning impossible.
pub const SURVIVAL_FLOOR: f64 = 1e-300;
/// Largest Poisson mean handled in one uniformization pass.
const MAX_CHUNK_MEAN: f64 = 1e4;

/// Poisson(`mean`) weights `w_0..=w_K`, with `K` the smallest index whose
/// right tail is below [`POISSON_TAIL`]. Computed outward from the mode and
/// renormalized, so no `exp(-mean)` underflow occurs.
pub(crate) fn poisson_weights(mean: f64) -> Vec<f64> {
    if mean == 0.0 {
        return vec![1.0];
    }
    let mode = mean.floor() as usize;
    let mut up = vec![1.0f64];
    let mut k = mode;
    loop {
        let w = up[up.len() - 1] * mean / (k + 1) as f64;
        k += 1;
        up.push(w);
        if w < 1e-32 && k as f64 > mean {
            break;
        }
    }
    let mut down = Vec::new();
    let mut w = 1.0f64;
    let mut k = mode;
    while k > 0 {
        w *= k as f64 / mean;
        k -= 1;
        if w < 1e-300 {
            break;
        }
        down.push(w);
    }
    let lo = mode - down.len();
    let mut weights = vec![0.0; lo];
    weights.extend(down.iter().rev());
    weights.extend(up);
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    let mut tail = 0.0;
    let mut cut = weights.len();
    while cut > 1 && tail + weights[cut - 1] < POISSON_TAIL {
        tail += weights[cut - 1];
        cut -= 1;
    }
    weights.truncate(cut);
    weights
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Row vectors: laws, `mu exp(tQ)`.
    Forward,
    /// Column vectors: functions, `exp(tQ) f`.
    Backward,
}

/// Steps a vector through the semigroup, keeping it rescaled.
///
/// Forward vectors are kept as probability vectors and the accumulated log
/// mass is the log survival probability. Backward vectors are rescaled by
/// their max-norm.
#[derive(Debug, Clone)]
pub struct Propagator<'a> {
    q: &'a SubGenerator,
    dir: Direction,
    v: Vec<f64>,
    log_scale: f64,
    t: f64,
    scratch: (Vec<f64>, Vec<f64>),
}

impl<'a> Propagator<'a> {
    pub fn forward(q: &'a SubGenerator, mu0: &[f64]) -> Result<Self> {
        check_probability(q, mu0)?;
        Ok(Self::with(q, Direction::Forward, mu0.to_vec()))
    }

    pub fn backward(q: &'a SubGenerator, f: &[f64]) -> Result<Self> {
        if f.len() != q.len() {
            return Err(invalid_arg(
                "f",
                format!("length {} differs from space size {}", f.len(), q.len()),
            ));
        }
        let mut p = Self::with(q, Direction::Backward, f.to_vec());
        p.rescale()?;
        Ok(p)
    }

    fn with(q: &'a SubGenerator, dir: Direction, v: Vec<f64>) -> Self {
        let n = v.len();
        Propagator {
            q,
            dir,
            v,
            log_scale: 0.0,
            t: 0.0,
            scratch: (vec![0.0; n], vec![0.0; n]),
        }
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn log_scale(&self) -> f64 {
        self.log_scale
    }

    /// Forward: the conditional law. Backward: the max-normalized function.
    pub fn law(&self) -> &[f64] {
        &self.v
    }

    /// Forward only: `P_mu0(t < tau)`.
    pub fn survival(&self) -> f64 {
        self.log_scale.exp()
    }

    /// Unscaled values `exp(tQ) f` (backward) or `mu0 exp(tQ)` (forward).
    pub fn values(&self) -> Vec<f64> {
        let s = self.log_scale.exp();
        self.v.iter().map(|x| x * s).collect()
    }

    pub fn advance(&mut self, dt: f64) -> Result<()> {
        if !(dt >= 0.0) || !dt.is_finite() {
            return Err(invalid_arg("t", format!("time step must be >= 0, got {dt}")));
        }
        if dt == 0.0 {
            return Ok(());
        }
        let lam = self.q.uniformization();
        let chunks = ((lam * dt) / MAX_CHUNK_MEAN).ceil().max(1.0) as usize;
        let h = dt / chunks as f64;
        for _ in 0..chunks {
            self.uniformized_pass(lam * h);
            self.t += h;
            self.rescale()?;
        }
        Ok(())
    }

    fn uniformized_pass(&mut self, mean: f64) {
        if mean == 0.0 {
            return;
        }
        let weights = poisson_weights(mean);
        let (cur, next) = &mut self.scratch;
        cur.copy_from_slice(&self.v);
        let acc = &mut self.v;
        acc.iter_mut().for_each(|x| *x = 0.0);
        let last = weights.len() - 1;
        for (k, &w) in weights.iter().enumerate() {
            if w > 0.0 {
                for (a, c) in acc.iter_mut().zip(cur.iter()) {
                    *a += w * c;
                }
            }
            if k < last {
                match self.dir {
                    Direction::Forward => self.q.left_step(cur, next),
                    Direction::Backward => self.q.right_step(cur, next),
                }
                std::mem::swap(cur, next);
            }
        }
    }

    fn rescale(&mut self) -> Result<()> {
        let s = match self.dir {
            Direction::Forward => self.v.iter().sum::<f64>(),
            Direction::Backward => self.v.iter().fold(0.0f64, |m, x| m.max(x.abs())),
        };
        if !(s > SURVIVAL_FLOOR) {
            if self.dir == Direction::Backward && s == 0.0 && self.t == 0.0 {
                // zero function stays zero
                return Ok(());
            }
            return Err(QsdError::ConditioningImpossible {
                t: self.t,
                survival: s * self.log_scale.exp(),
            });
        }
        for x in &mut self.v {
            *x /= s;
        }
        self.log_scale += s.ln();
        Ok(())
    }
}

fn check_probability(q: &SubGenerator, mu: &[f64]) -> Result<()> {
    if mu.len() != q.len() {
        return Err(invalid_arg(
            "mu0",
            format!("length {} differs from space size {}", mu.len(), q.len()),
        ));
    }
    if mu.iter().any(|&x| !(x >= 0.0)) {
        return Err(invalid_arg("mu0", "entries must be >= 0"));
    }
    let s: f64 = mu.iter().sum();
    if (s - 1.0).abs() > 1e-9 {
        return Err(invalid_arg("mu0", format!("mass must be 1, got {s}")));
    }
    Ok(())
}

/// Conditional law `mu_t = mu0 exp(tQ) / survival` and `survival = |mu0 exp(tQ)|_1`.
pub fn transient_conditional(q: &SubGenerator, mu0: &[f64], t: f64) -> Result<(Vec<f64>, f64)> {
    let mut p = Propagator::forward(q, mu0)?;
    p.advance(t)?;
    let survival = p.survival();
    if !(survival >= SURVIVAL_FLOOR) {
        return Err(QsdError::ConditioningImpossible { t, survival });
    }
    Ok((p.v, survival))
}

pub fn survival_probability(q: &SubGenerator, mu0: &[f64], t: f64) -> Result<f64> {
    transient_conditional(q, mu0, t).map(|(_, s)| s)
}

/// `exp(tQ) f`, e.g. `f = 1` gives `P_x(t < tau)` for every `x`.
pub fn backward(q: &SubGenerator, f: &[f64], t: f64) -> Result<Vec<f64>> {
    let mut p = Propagator::backward(q, f)?;
    p.advance(t)?;
    Ok(p.values())
}
