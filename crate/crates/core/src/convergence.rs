//! Exponential convergence of conditional laws to the QSD on a truncation,
//! the mixing conditions (A1)/(A2) with `nu` the point mass at `(1, ..., 1)`,
//! and the plateau of `exp(lambda0 t) P_x(t < tau)`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid_arg, QsdError, Result};
use crate::model::State;
use crate::truncation::{Propagator, QsdResult, SubGenerator, TruncatedSpace};

/// TV window used by [`fit_rate`].
pub const FIT_WINDOW: (f64, f64) = (1e-6, 1e-1);
/// Fewest grid points accepted in the fit window.
pub const MIN_FIT_POINTS: usize = 5;
pub const DEFAULT_T_MAX: f64 = 20.0;
pub const DEFAULT_DT: f64 = 0.05;
/// Tolerance of the emission-time re-verification of certificate constants.
pub const REVERIFY_TOL: f64 = 1e-9;

/// Half the L1 distance.
pub fn tv_distance(mu: &[f64], nu: &[f64]) -> Result<f64> {
    if mu.len() != nu.len() {
        return Err(invalid_arg(
            "nu",
            format!("length {} differs from {}", nu.len(), mu.len()),
        ));
    }
    let d = 0.5 * mu.iter().zip(nu).map(|(a, b)| (a - b).abs()).sum::<f64>();
    Ok(d.min(1.0))
}

/// `t_k = k dt`, `k = 0..=round(t_max / dt)`.
pub fn uniform_grid(t_max: f64, dt: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0 && dt.is_finite()) || !(t_max >= 0.0 && t_max.is_finite()) {
        return Err(invalid_arg("t_grid", format!("need dt > 0 and t_max >= 0, got dt = {dt}, t_max = {t_max}")));
    }
    let k = (t_max / dt).round() as usize;
    Ok((0..=k).map(|i| i as f64 * dt).collect())
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(invalid_arg("t_grid", "empty time grid"));
    }
    if !(grid[0] >= 0.0) || grid.iter().any(|t| !t.is_finite()) {
        return Err(invalid_arg("t_grid", "times must be finite and >= 0"));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid_arg("t_grid", "times must be strictly increasing"));
    }
    Ok(())
}

/// The all-ones state, the corners `(N - r + 1, 1, ..., 1)` and the balanced
/// state on the top level: the extremes of a truncation.
pub fn extreme_initials(space: &TruncatedSpace) -> Vec<State> {
    let r = space.dim();
    let n = space.level();
    let mut out = vec![State::new(vec![1; r])];
    for i in 0..r {
        let mut c = vec![1; r];
        c[i] = n - r as u64 + 1;
        out.push(State::new(c));
    }
    let q = n / r as u64;
    let extra = (n % r as u64) as usize;
    out.push(State::new((0..r).map(|i| q + u64::from(i < extra)).collect()));
    out.sort();
    out.dedup();
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceCurve {
    pub times: Vec<f64>,
    pub initials: Vec<State>,
    /// `tv[i][k] = TV(P_{x_i}(X_{t_k} in . | t_k < tau), alpha)`
    pub tv: Vec<Vec<f64>>,
    /// `survival[i][k] = P_{x_i}(t_k < tau)`
    pub survival: Vec<Vec<f64>>,
}

impl ConvergenceCurve {
    /// Survival is nonincreasing in `t` for every initial, up to a relative
    /// rounding slack of `1e-12`.
    pub fn survival_nonincreasing(&self) -> bool {
        self.survival
            .iter()
            .all(|s| s.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)))
    }

    pub fn fits(&self) -> Vec<Result<RateFit>> {
        self.tv.iter().map(|tv| fit_rate(&self.times, tv)).collect()
    }
}

/// TV distance to `alpha` of the conditional law started from each initial,
/// on every grid time.
pub fn convergence_curve(
    q: &SubGenerator,
    qsd: &QsdResult,
    initials: &[State],
    grid: &[f64],
) -> Result<ConvergenceCurve> {
    check_grid(grid)?;
    if qsd.alpha.len() != q.len() {
        return Err(invalid_arg("qsd", "alpha length differs from the space size"));
    }
    let space = q.space();
    let starts = initials
        .iter()
        .map(|x| space.point_mass(x))
        .collect::<Result<Vec<_>>>()?;
    let rows = starts
        .par_iter()
        .map(|mu0| {
            let mut p = Propagator::forward(q, mu0)?;
            let mut tv = Vec::with_capacity(grid.len());
            let mut surv = Vec::with_capacity(grid.len());
            for &t in grid {
                p.advance(t - p.time())?;
                tv.push(tv_distance(p.law(), &qsd.alpha)?);
                surv.push(p.survival());
            }
            Ok((tv, surv))
        })
        .collect::<Result<Vec<_>>>()?;
    let (tv, survival) = rows.into_iter().unzip();
    Ok(ConvergenceCurve {
        times: grid.to_vec(),
        initials: initials.to_vec(),
        tv,
        survival,
    })
}

/// `TV(t) ~ C exp(-rate t)` on the grid points with `TV` in [`FIT_WINDOW`].
#[derive(Debug, Clone, Serialize)]
pub struct RateFit {
    /// `exp(intercept)` of the least-squares line.
    pub prefactor: f64,
    pub rate: f64,
    /// First and last fitted times.
    pub window: (f64, f64),
    pub points: usize,
    /// RMS residual of `ln TV`.
    pub residual: f64,
    /// Prefactor raised by the largest positive residual (and a few ulps), so
    /// that `envelope_prefactor exp(-rate t)` dominates every fitted point.
    pub envelope_prefactor: f64,
}

impl RateFit {
    pub fn envelope(&self, t: f64) -> f64 {
        self.envelope_prefactor * (-self.rate * t).exp()
    }
}

const ENVELOPE_ULPS: f64 = 8.0;

pub fn fit_rate(times: &[f64], tv: &[f64]) -> Result<RateFit> {
    if times.len() != tv.len() {
        return Err(invalid_arg("tv", "length differs from the time grid"));
    }
    let (x, y): (Vec<f64>, Vec<f64>) = times
        .iter()
        .zip(tv)
        .filter(|(_, v)| **v >= FIT_WINDOW.0 && **v <= FIT_WINDOW.1)
        .map(|(t, v)| (*t, v.ln()))
        .unzip();
    if x.len() < MIN_FIT_POINTS {
        return Err(QsdError::NoFit(format!(
            "{} grid points with TV in [{:e}, {:e}], need {MIN_FIT_POINTS}",
            x.len(),
            FIT_WINDOW.0,
            FIT_WINDOW.1
        )));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    if !(slope < 0.0) {
        return Err(QsdError::NoFit(format!("fitted rate {} is not positive", -slope)));
    }
    let res: Vec<f64> = x.iter().zip(&y).map(|(a, b)| b - (intercept + slope * a)).collect();
    let rms = (res.iter().map(|r| r * r).sum::<f64>() / n).sqrt();
    let lift = res.iter().fold(0.0f64, |m, r| m.max(*r));
    Ok(RateFit {
        prefactor: intercept.exp(),
        rate: -slope,
        window: (x[0], x[x.len() - 1]),
        points: x.len(),
        residual: rms,
        envelope_prefactor: (intercept + lift).exp() * (1.0 + ENVELOPE_ULPS * f64::EPSILON),
    })
}

/// Constants of (A1) and (A2) for `nu = delta_(1,...,1)`.
#[derive(Debug, Clone, Serialize)]
pub struct MixingCertificate {
    pub nu: State,
    pub t0: Option<f64>,
    /// `min_x P_x(X_{t0} = nu | t0 < tau)`
    pub c1: Option<f64>,
    pub c1_witness: Option<State>,
    /// `min_{x, t} P_nu(t < tau) / P_x(t < tau)`
    pub c2: Option<f64>,
    pub c2_witness: Option<(State, f64)>,
    /// Last grid time used for `c2`.
    pub grid_end: Option<f64>,
    /// Largest change of `c1`, `c2` when recomputed at doubled resolution.
    pub resolution_gap: Option<f64>,
    pub notes: Vec<String>,
}

impl MixingCertificate {
    fn empty(nu: State) -> Self {
        MixingCertificate {
            nu,
            t0: None,
            c1: None,
            c1_witness: None,
            c2: None,
            c2_witness: None,
            grid_end: None,
            resolution_gap: None,
            notes: Vec::new(),
        }
    }

    pub fn a1_valid(&self) -> bool {
        self.c1.is_some_and(|c| c > 0.0)
    }

    pub fn a2_valid(&self) -> bool {
        self.c2.is_some_and(|c| c > 0.0)
    }
}

fn nu_index(space: &TruncatedSpace) -> Result<(State, usize)> {
    let nu = State::new(vec![1; space.dim()]);
    let i = space.require_index(&nu)?;
    Ok((nu, i))
}

/// Backward propagation of `f`, returning `ln (exp(tQ) f)(x)` for all `x`
/// after `steps` equal sub-steps.
fn log_backward(q: &SubGenerator, f: &[f64], t: f64, steps: usize) -> Result<Vec<f64>> {
    let mut p = Propagator::backward(q, f)?;
    for _ in 0..steps {
        p.advance(t / steps as f64)?;
    }
    let ls = p.log_scale();
    Ok(p.law().iter().map(|v| v.ln() + ls).collect())
}

fn relative_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// `c1 = min_x P_x(X_{t0} = nu | t0 < tau)`, from one backward pass of the
/// indicator of `nu` and one of `1`. The minimizing state is re-checked by a
/// forward solve.
pub fn verify_a1(q: &SubGenerator, t0: f64) -> Result<MixingCertificate> {
    verify_a1_steps(q, t0, 1)
}

/// As [`verify_a1`], advancing to `t0` in `steps` equal sub-steps.
pub fn verify_a1_steps(q: &SubGenerator, t0: f64, steps: usize) -> Result<MixingCertificate> {
    if !(t0 >= 0.0 && t0.is_finite()) {
        return Err(invalid_arg("t0", format!("must be finite and >= 0, got {t0}")));
    }
    let space = q.space();
    let (nu, k) = nu_index(space)?;
    let mut e = vec![0.0; q.len()];
    e[k] = 1.0;
    let hit = log_backward(q, &e, t0, steps.max(1))?;
    let surv = log_backward(q, &vec![1.0; q.len()], t0, steps.max(1))?;
    let (arg, c1) = hit
        .iter()
        .zip(&surv)
        .map(|(h, s)| (h - s).exp())
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    let witness = space.state(arg).clone();
    let mut p = Propagator::forward(q, &space.point_mass(&witness)?)?;
    p.advance(t0)?;
    let direct = p.law()[k];
    let mut cert = MixingCertificate::empty(nu);
    if relative_gap(direct, c1) > REVERIFY_TOL && (direct - c1).abs() > REVERIFY_TOL {
        cert.notes.push(format!(
            "forward re-verification at {witness} gave {direct}, backward gave {c1}"
        ));
    }
    cert.t0 = Some(t0);
    cert.c1 = Some(c1);
    cert.c1_witness = Some(witness);
    Ok(cert)
}

/// `c2 = min over grid times and states of P_nu(t < tau) / P_x(t < tau)`.
///
/// The grid is cut at the first time a survival probability is no longer
/// representable; a note records the cut.
pub fn verify_a2(q: &SubGenerator, grid: &[f64]) -> Result<MixingCertificate> {
    check_grid(grid)?;
    let space = q.space();
    let (nu, k) = nu_index(space)?;
    let mut cert = MixingCertificate::empty(nu);
    let mut p = Propagator::backward(q, &vec![1.0; q.len()])?;
    let mut best = (f64::INFINITY, 0usize, 0.0);
    for &t in grid {
        match p.advance(t - p.time()) {
            Ok(()) => {}
            Err(QsdError::ConditioningImpossible { .. }) => {
                cert.notes.push(format!("survival underflow: grid cut before t = {t}"));
                break;
            }
            Err(e) => return Err(e),
        }
        let u = p.law();
        if u.iter().any(|v| !(*v > 0.0)) || p.log_scale() < f64::MIN_POSITIVE.ln() {
            cert.notes.push(format!("survival underflow: grid cut before t = {t}"));
            break;
        }
        let (arg, min_u) = u
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, v)| (i, u[k] / v))
            .unwrap();
        if min_u < best.0 {
            best = (min_u, arg, t);
        }
        cert.grid_end = Some(t);
    }
    if cert.grid_end.is_none() {
        return Ok(cert);
    }
    let (c2, arg, t) = best;
    let witness = space.state(arg).clone();
    let s_nu = survival_from(q, &cert.nu, t)?;
    let s_x = survival_from(q, &witness, t)?;
    let direct = s_nu / s_x;
    if relative_gap(direct, c2) > REVERIFY_TOL {
        cert.notes.push(format!(
            "forward re-verification at ({witness}, t = {t}) gave {direct}, backward gave {c2}"
        ));
    }
    cert.c2 = Some(c2);
    cert.c2_witness = Some((witness, t));
    Ok(cert)
}

fn survival_from(q: &SubGenerator, x: &State, t: f64) -> Result<f64> {
    let mut p = Propagator::forward(q, &q.space().point_mass(x)?)?;
    p.advance(t)?;
    Ok(p.survival())
}

/// (A1) at `t0` and (A2) on `grid`, each recomputed at doubled resolution
/// (two sub-steps to `t0`, grid midpoints added); the largest change is
/// stored in `resolution_gap`.
pub fn certify(q: &SubGenerator, t0: f64, grid: &[f64]) -> Result<MixingCertificate> {
    let fine_grid = refine(grid);
    let ((a1, a1_fine), (a2, a2_fine)) = rayon::join(
        || rayon::join(|| verify_a1(q, t0), || verify_a1_steps(q, t0, 2)),
        || rayon::join(|| verify_a2(q, grid), || verify_a2(q, &fine_grid)),
    );
    let (a1, a1_fine, a2, a2_fine) = (a1?, a1_fine?, a2?, a2_fine?);
    let gap = |a: Option<f64>, b: Option<f64>| match (a, b) {
        (Some(a), Some(b)) => (a - b).abs(),
        (None, None) => 0.0,
        _ => f64::INFINITY,
    };
    let mut cert = a1;
    cert.resolution_gap = Some(gap(cert.c1, a1_fine.c1).max(gap(a2.c2, a2_fine.c2)));
    cert.c2 = a2.c2;
    cert.c2_witness = a2.c2_witness;
    cert.grid_end = a2.grid_end;
    cert.notes.extend(a2.notes);
    Ok(cert)
}

/// Grid with every midpoint inserted.
pub fn refine(grid: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * grid.len());
    for w in grid.windows(2) {
        out.push(w[0]);
        out.push(0.5 * (w[0] + w[1]));
    }
    out.extend(grid.last());
    out
}

/// `sup_x |exp(lambda0 t) P_x(t < tau) - eta(x)|` on the grid, which is cut
/// where `exp(lambda0 t)` would overflow.
pub fn eta_plateau(q: &SubGenerator, qsd: &QsdResult, grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    check_grid(grid)?;
    if qsd.eta.len() != q.len() {
        return Err(invalid_arg("qsd", "eta length differs from the space size"));
    }
    let mut p = Propagator::backward(q, &vec![1.0; q.len()])?;
    let mut out = Vec::with_capacity(grid.len());
    for &t in grid {
        let growth = qsd.lambda0 * t;
        if growth > f64::MAX.ln() {
            break;
        }
        p.advance(t - p.time())?;
        let scale = (growth + p.log_scale()).exp();
        let err = p
            .law()
            .iter()
            .zip(&qsd.eta)
            .map(|(s, e)| (s * scale - e).abs())
            .fold(0.0, f64::max);
        out.push((t, err));
    }
    Ok(out)
}
