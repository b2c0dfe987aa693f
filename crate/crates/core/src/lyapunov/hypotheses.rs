use rayon::prelude::*;

use super::sweep::{monotone_top_half, sweep_levels, sweep_states, top_decade_slope, FLAT_SLOPE};
use super::{AssumptionReport, Verdict, Witness};
use crate::error::{invalid_arg, Result};
use crate::model::{LitterLaw, Model, RateFamily, State};

/// Default lower bound a growing ratio must exceed at the top of the range.
pub const DEFAULT_GROWTH_THRESHOLD: f64 = 10.0;

const EXPONENT_GRID: f64 = 1e-9;
const DECLARED_SLACK: f64 = 1e-6;

fn snap(x: f64) -> f64 {
    let v = (x / EXPONENT_GRID).round() * EXPONENT_GRID;
    if v == 0.0 {
        0.0
    } else {
        v
    }
}

#[derive(Debug, Clone)]
struct LevelRates {
    size: u64,
    max_b: (f64, State),
    max_d: (f64, State),
    min_c: (f64, State),
    bad_birth: Option<State>,
}

fn level_rates(model: &Model, levels: &[u64]) -> Vec<LevelRates> {
    let dim = model.dim();
    levels
        .par_iter()
        .map(|&s| {
            let states = sweep_states(dim, s);
            let mut out = LevelRates {
                size: s,
                max_b: (f64::NEG_INFINITY, states[0].clone()),
                max_d: (f64::NEG_INFINITY, states[0].clone()),
                min_c: (f64::INFINITY, states[0].clone()),
                bad_birth: None,
            };
            for n in &states {
                for i in 0..dim {
                    let b = model.birth(i, n);
                    if !(b > 0.0) && out.bad_birth.is_none() {
                        out.bad_birth = Some(n.clone());
                    }
                    if b > out.max_b.0 {
                        out.max_b = (b, n.clone());
                    }
                    let d = model.death(i, n);
                    if d > out.max_d.0 {
                        out.max_d = (d, n.clone());
                    }
                    let c = model.competition(i, i, n);
                    if c < out.min_c.0 {
                        out.min_c = (c, n.clone());
                    }
                }
            }
            out
        })
        .collect()
}

/// Growth exponents `beta1`, `beta2`: declared values when present, otherwise
/// least-squares slopes of log rate against log `|n|` on the top decade.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exponents {
    pub beta1: f64,
    pub beta2: f64,
    pub beta1_fitted: bool,
    pub beta2_fitted: bool,
    /// Fitted values even when exponents are declared.
    pub fit_beta1: f64,
    pub fit_beta2: f64,
}

fn exponents_from(model: &Model, prof: &[LevelRates]) -> Exponents {
    let levels: Vec<u64> = prof.iter().map(|p| p.size).collect();
    let slope = |vals: Vec<f64>| top_decade_slope(&levels, &vals).unwrap_or(0.0);
    let sb = slope(prof.iter().map(|p| p.max_b.0).collect());
    let sd = slope(prof.iter().map(|p| p.max_d.0).collect());
    let sc = slope(prof.iter().map(|p| p.min_c.0).collect());
    let fit_beta1 = snap(sb.max(sd).max(0.0));
    let fit_beta2 = snap(-sc);
    let declared = model.rates().declared;
    Exponents {
        beta1: declared.beta1.unwrap_or(fit_beta1),
        beta2: declared.beta2.unwrap_or(fit_beta2),
        beta1_fitted: declared.beta1.is_none(),
        beta2_fitted: declared.beta2.is_none(),
        fit_beta1,
        fit_beta2,
    }
}

pub fn fitted_exponents(model: &Model, n_check: u64) -> Exponents {
    let levels = sweep_levels(model.dim(), n_check);
    exponents_from(model, &level_rates(model, &levels))
}

fn empty_range(name: &str, model: &Model, n_check: u64) -> AssumptionReport {
    let mut rep = AssumptionReport::new(
        name,
        Verdict::inconclusive(format!(
            "no interior state with |n| <= {n_check} in dimension {}",
            model.dim()
        )),
    );
    rep.n_check = Some(n_check);
    rep
}

/// `0 < b_i <= b_bar |n|^beta1`, `d_i <= d_bar |n|^beta1`,
/// `c_ii >= c_low |n|^-beta2` with `beta1 + gamma beta2 < gamma`.
pub fn check_h1(model: &Model, n_check: u64) -> AssumptionReport {
    growth_bounds(model, n_check, "H1", false)
}

fn growth_bounds(model: &Model, n_check: u64, name: &str, birth_death_only: bool) -> AssumptionReport {
    let levels = sweep_levels(model.dim(), n_check);
    if levels.is_empty() {
        return empty_range(name, model, n_check);
    }
    let prof = level_rates(model, &levels);
    let ex = exponents_from(model, &prof);
    let gamma = model.gamma();
    let top = prof.last().unwrap();

    let b_bar = prof
        .iter()
        .map(|p| p.max_b.0 / (p.size as f64).powf(ex.beta1))
        .fold(0.0, f64::max);
    let d_bar = prof
        .iter()
        .map(|p| p.max_d.0.max(0.0) / (p.size as f64).powf(ex.beta1))
        .fold(0.0, f64::max);
    let c_low = prof
        .iter()
        .map(|p| p.min_c.0 * (p.size as f64).powf(ex.beta2))
        .fold(f64::INFINITY, f64::min);
    let (margin, condition) = if birth_death_only {
        (gamma - ex.beta1, "beta1 < gamma")
    } else {
        (gamma - ex.beta1 - gamma * ex.beta2, "beta1 + gamma beta2 < gamma")
    };

    let verdict = if let Some(n) = prof.iter().find_map(|p| p.bad_birth.clone()) {
        Verdict::fail(Witness::State(n), "birth rate is not positive")
    } else if !ex.beta1_fitted && ex.fit_beta1 > ex.beta1 + DECLARED_SLACK {
        let at = if top.max_b.0 >= top.max_d.0 { &top.max_b.1 } else { &top.max_d.1 };
        Verdict::fail(
            Witness::State(at.clone()),
            format!(
                "birth/death rates grow like |n|^{} on the top decade, faster than the declared beta1 = {}",
                ex.fit_beta1, ex.beta1
            ),
        )
    } else if !birth_death_only && !ex.beta2_fitted && ex.fit_beta2 > ex.beta2 + DECLARED_SLACK {
        Verdict::fail(
            Witness::State(top.min_c.1.clone()),
            format!(
                "c_ii decays like |n|^-{} on the top decade, faster than the declared beta2 = {}",
                ex.fit_beta2, ex.beta2
            ),
        )
    } else if !birth_death_only && !(c_low > 0.0) {
        let at = prof
            .iter()
            .min_by(|a, b| a.min_c.0.total_cmp(&b.min_c.0))
            .unwrap();
        Verdict::fail(Witness::State(at.min_c.1.clone()), "c_ii is not bounded below by a positive multiple of |n|^-beta2")
    } else if ex.beta1 < 0.0 || (!birth_death_only && ex.beta2 >= 1.0) {
        Verdict::fail(
            Witness::Parameters(format!("beta1 = {}, beta2 = {}", ex.beta1, ex.beta2)),
            "exponents outside beta1 >= 0, beta2 < 1",
        )
    } else if !(margin > 0.0) {
        Verdict::fail(
            Witness::Parameters(format!("beta1 = {}, beta2 = {}, gamma = {gamma}", ex.beta1, ex.beta2)),
            format!("{condition} fails"),
        )
    } else if model.rates().family() == RateFamily::Callback && (ex.beta1_fitted || ex.beta2_fitted) {
        Verdict::inconclusive("callback rates without declared exponents; fitted exponents are heuristic")
    } else {
        Verdict::PassOnRange
    };

    let mut rep = AssumptionReport::new(name, verdict)
        .constant("b_bar", b_bar)
        .constant("d_bar", d_bar)
        .constant("beta1", ex.beta1)
        .constant("gamma", gamma);
    if !birth_death_only {
        rep = rep.constant("c_low", c_low).constant("beta2", ex.beta2);
    }
    rep.n_check = Some(n_check);
    rep.margin = Some(margin);
    rep.curve = prof
        .iter()
        .map(|p| (p.size as f64, p.max_b.0))
        .collect();
    for (fitted, name, v) in [
        (ex.beta1_fitted, "beta1", ex.beta1),
        (ex.beta2_fitted && !birth_death_only, "beta2", ex.beta2),
    ] {
        if fitted {
            rep.notes.push(format!("{name} = {v} fitted on the top decade of the range"));
        }
    }
    rep
}

/// Turns a per-level minimum ratio that should diverge into a verdict.
fn growth_verdict(
    levels: &[u64],
    mins: &[f64],
    argmins: &[State],
    threshold: f64,
    what: &str,
) -> (Verdict, f64) {
    let slope = top_decade_slope(levels, mins).unwrap_or(0.0);
    let last = *mins.last().unwrap();
    let verdict = if slope < FLAT_SLOPE {
        Verdict::fail(
            Witness::State(argmins.last().unwrap().clone()),
            format!("{what} stays bounded on the range (log-log slope {slope:.4} on the top decade)"),
        )
    } else if monotone_top_half(levels, mins, true) && last > threshold {
        Verdict::PassOnRange
    } else {
        Verdict::inconclusive(format!(
            "{what} grows (slope {slope:.4}) but is {last:.4} at the top of the range or not monotone over its top half"
        ))
    };
    (verdict, slope)
}

fn decay_verdict(levels: &[u64], maxs: &[f64], argmaxs: &[State], threshold: f64, what: &str) -> (Verdict, f64) {
    let top = *levels.last().unwrap() as f64;
    let top_half_zero = levels
        .iter()
        .zip(maxs)
        .filter(|(s, _)| **s as f64 >= top / 2.0)
        .all(|(_, v)| *v == 0.0);
    if top_half_zero {
        return (Verdict::PassOnRange, f64::NEG_INFINITY);
    }
    let slope = top_decade_slope(levels, maxs).unwrap_or(0.0);
    let last = *maxs.last().unwrap();
    let verdict = if slope > -FLAT_SLOPE {
        Verdict::fail(
            Witness::State(argmaxs.last().unwrap().clone()),
            format!("{what} does not decay on the range (log-log slope {slope:.4} on the top decade)"),
        )
    } else if monotone_top_half(levels, maxs, false) && last < 1.0 / threshold {
        Verdict::PassOnRange
    } else {
        Verdict::inconclusive(format!(
            "{what} decays (slope {slope:.4}) but is {last:.4e} at the top of the range or not monotone over its top half"
        ))
    };
    (verdict, slope)
}

/// Per-level minimum (or maximum) of a state function over the sweep.
fn level_extremes(
    model: &Model,
    levels: &[u64],
    f: impl Fn(&State) -> f64 + Sync,
    minimum: bool,
) -> (Vec<f64>, Vec<State>) {
    levels
        .par_iter()
        .map(|&s| {
            let mut best = (if minimum { f64::INFINITY } else { f64::NEG_INFINITY }, None);
            for n in sweep_states(model.dim(), s) {
                let v = f(&n);
                let better = if minimum { v < best.0 } else { v > best.0 };
                if better || best.1.is_none() {
                    best = (v, Some(n));
                }
            }
            (best.0, best.1.unwrap())
        })
        .unzip()
}

/// `c_ii >> sum_{j != k} c_jk + |n|^-1 sum_j c_jj`, read off the per-level
/// minimum over `i` and states of the ratio.
pub fn check_h2(model: &Model, n_check: u64, threshold: f64) -> AssumptionReport {
    let levels = sweep_levels(model.dim(), n_check);
    if levels.is_empty() {
        return empty_range("H2", model, n_check);
    }
    let r = model.dim();
    let ratio = |n: &State| {
        let mut off = 0.0;
        let mut diag = 0.0;
        for j in 0..r {
            for k in 0..r {
                let c = model.competition(j, k, n);
                if j == k {
                    diag += c;
                } else {
                    off += c;
                }
            }
        }
        let denom = off + diag / n.size() as f64;
        (0..r)
            .map(|i| model.competition(i, i, n) / denom)
            .fold(f64::INFINITY, f64::min)
    };
    let (mins, at) = level_extremes(model, &levels, ratio, true);
    let (verdict, slope) = growth_verdict(&levels, &mins, &at, threshold, "c_ii over the competition sum");
    let mut rep = AssumptionReport::new("H2", verdict)
        .constant("ratio_at_top", *mins.last().unwrap())
        .constant("log_slope", slope)
        .constant("threshold", threshold);
    rep.n_check = Some(n_check);
    rep.margin = Some(mins.last().unwrap() - threshold);
    rep.curve = levels.iter().map(|&s| s as f64).zip(mins).collect();
    rep
}

/// `r^-(1 + gamma)`, the default for the constant of the mixed condition.
pub fn default_cr(r: usize, gamma: f64) -> f64 {
    (r as f64).powf(-(1.0 + gamma))
}

/// Mixed condition replacing H2 and the lower bound on `c_ii`:
/// `sum_j (n_j/|n|) 1{n_j != 1} T_j >= C_r sum_j 1{n_j = 1} T_j` for `|n|`
/// in the top half of the range, and the left side `>> |n|^(beta1 v gamma)`,
/// with `T_j = (sum_k c_jk n_k)^gamma`.
pub fn check_remark1(model: &Model, n_check: u64, c_r: Option<f64>, threshold: f64) -> AssumptionReport {
    let levels = sweep_levels(model.dim(), n_check);
    if levels.is_empty() {
        return empty_range("Remark1", model, n_check);
    }
    let r = model.dim();
    let c_r = c_r.unwrap_or_else(|| default_cr(r, model.gamma()));
    let beta1 = fitted_exponents(model, n_check).beta1;
    let power = beta1.max(model.gamma());
    let sides = |n: &State| {
        let size = n.size() as f64;
        let (mut left, mut right) = (0.0, 0.0);
        for (j, &nj) in n.coords().iter().enumerate() {
            let t = model.competition_term(j, n);
            if nj == 1 {
                right += t;
            } else {
                left += nj as f64 / size * t;
            }
        }
        (left, right)
    };
    let (slack, slack_at) = level_extremes(
        model,
        &levels,
        |n| {
            let (l, rr) = sides(n);
            l - c_r * rr
        },
        true,
    );
    let (growth, growth_at) = level_extremes(
        model,
        &levels,
        |n| sides(n).0 / (n.size() as f64).powf(power),
        true,
    );
    let top = *levels.last().unwrap() as f64;
    let half: Vec<usize> = (0..levels.len()).filter(|&k| levels[k] as f64 >= top / 2.0).collect();
    let worst = half
        .iter()
        .copied()
        .min_by(|&a, &b| slack[a].total_cmp(&slack[b]))
        .unwrap();
    // smallest level from which the inequality holds at every checked state
    let mut from = None;
    for k in (0..levels.len()).rev() {
        if slack[k] < 0.0 {
            break;
        }
        from = Some(levels[k]);
    }
    let (gv, slope) = growth_verdict(&levels, &growth, &growth_at, threshold, "left side over |n|^(beta1 v gamma)");
    let verdict = if slack[worst] < 0.0 {
        Verdict::fail(
            Witness::State(slack_at[worst].clone()),
            format!("inequality with C_r = {c_r} fails in the top half of the range"),
        )
    } else {
        gv
    };
    let mut rep = AssumptionReport::new("Remark1", verdict)
        .constant("C_r", c_r)
        .constant("beta1", beta1)
        .constant("growth_log_slope", slope)
        .constant("threshold", threshold);
    if let Some(s) = from {
        rep = rep.constant("holds_from_level", s as f64);
    }
    rep.n_check = Some(n_check);
    rep.margin = Some(slack[worst]);
    rep.curve = levels.iter().map(|&s| s as f64).zip(growth).collect();
    if c_r == default_cr(r, model.gamma()) {
        rep.notes.push(format!("C_r defaults to r^-(1+gamma) = {c_r}"));
    }
    rep
}

/// `(r - 1) (1/gamma) (1 - eps/gamma)^(gamma/eps - 1)`.
pub fn thm2_working_lhs(r: usize, gamma: f64, eps: f64) -> f64 {
    let x = eps / gamma;
    (r as f64 - 1.0) / gamma * ((1.0 / x - 1.0) * (-x).ln_1p()).exp()
}

const DELTA_GRID: f64 = 1e-6;

/// Arithmetic threshold `r < 1 + e gamma` and a search for `(eps, delta)` with
/// `thm2_working_lhs(r, gamma, eps) <= 1 - delta`. `eps` runs over
/// `gamma 10^(-k/8)`, `k = 1..=96`; `delta` is rounded down to a multiple of
/// `1e-6` and the inequality re-checked at the reported values.
pub fn thm2_threshold(r: usize, gamma: f64) -> AssumptionReport {
    let bound = 1.0 + std::f64::consts::E * gamma;
    let arithmetic = (r as f64) < bound;
    let mut best: Option<(f64, f64, f64)> = None;
    for k in 1..=96 {
        let eps = gamma * 10f64.powf(-(k as f64) / 8.0);
        let lhs = thm2_working_lhs(r, gamma, eps);
        let delta = (((1.0 - lhs) / DELTA_GRID).floor() * DELTA_GRID).min(1.0 - DELTA_GRID);
        if delta > 0.0 && lhs <= 1.0 - delta && best.is_none_or(|b| delta > b.1) {
            best = Some((eps, delta, lhs));
        }
    }
    let verdict = match (arithmetic, best) {
        (true, Some(_)) => Verdict::PassOnRange,
        (false, _) => Verdict::fail(
            Witness::Parameters(format!("r = {r}, gamma = {gamma}")),
            format!("r = {r} is not below 1 + e gamma = {bound}"),
        ),
        (true, None) => Verdict::inconclusive(format!(
            "r < 1 + e gamma = {bound} but no (eps, delta) found on the grid"
        )),
    };
    let mut rep = AssumptionReport::new("Thm2", verdict)
        .constant("r", r as f64)
        .constant("gamma", gamma)
        .constant("threshold", bound);
    rep.margin = Some(bound - r as f64);
    if let Some((eps, delta, lhs)) = best {
        rep = rep
            .constant("eps", eps)
            .constant("delta", delta)
            .constant("working_lhs", lhs);
    }
    rep
}

/// Neutral competition (every `c_ij` the same constant), growth bounds on
/// `b` and `d` with `beta1 < gamma`, and [`thm2_threshold`].
pub fn check_thm2(model: &Model, n_check: u64) -> AssumptionReport {
    let mut rep = thm2_threshold(model.dim(), model.gamma());
    let h3 = growth_bounds(model, n_check, "H3", true);
    rep.n_check = Some(n_check);
    match model.rates().neutral_competition() {
        Some(c) => rep.constants.insert("c".into(), c),
        None => {
            rep.verdict = Verdict::fail(
                Witness::Parameters("competition matrix".into()),
                "competition is not neutral: c_ij is not one shared constant",
            );
            return rep;
        }
    };
    for key in ["b_bar", "d_bar", "beta1"] {
        rep.constants.insert(key.into(), h3.constants[key]);
    }
    if !h3.verdict.is_pass() && rep.verdict.is_pass() {
        rep.verdict = h3.verdict;
    }
    rep
}

/// One type: `b_n <= n b_bar`, `d_n >= n^2 c_low`, `a_n <= delta c_low n` with
/// `delta < 1` on `[n0, N]` for the smallest such `n0 <= N/2`. Several types:
/// `a(n) / (min_i c_ii(n) |n|^gamma)` decays over the range.
pub fn check_catastrophes(model: &Model, n_check: u64, threshold: f64) -> Result<AssumptionReport> {
    if model.extensions().catastrophe.is_none() {
        return Err(invalid_arg("model", "catastrophes are not enabled"));
    }
    if model.dim() > 1 {
        return Ok(catastrophes_multi(model, n_check, threshold));
    }
    if n_check < 2 {
        return Ok(empty_range("catastrophes", model, n_check));
    }
    let n = n_check as usize;
    let (mut b, mut c, mut a) = (vec![0.0; n + 1], vec![0.0; n + 1], vec![0.0; n + 1]);
    for k in 1..=n {
        let s = State::from([k as u64]);
        let x = k as f64;
        b[k] = model.birth(0, &s);
        c[k] = model.death_intensity(0, &s) / x;
        a[k] = model.catastrophe(&s) / x;
    }
    // suffix extremes over [k, N]
    let (mut sb, mut sc, mut sa) = (b.clone(), c.clone(), a.clone());
    let mut arg_a: Vec<usize> = (0..=n).collect();
    for k in (1..n).rev() {
        sb[k] = sb[k].max(sb[k + 1]);
        sc[k] = sc[k].min(sc[k + 1]);
        if sa[k + 1] > sa[k] {
            sa[k] = sa[k + 1];
            arg_a[k] = arg_a[k + 1];
        }
    }
    let found = (1..=n / 2).find(|&k| sc[k] > 0.0 && sa[k] / sc[k] < 1.0);
    let (n0, verdict) = match found {
        Some(k) => (k, Verdict::PassOnRange),
        None => {
            let k = n / 2;
            (
                k,
                Verdict::fail(
                    Witness::State(State::from([arg_a[k] as u64])),
                    format!(
                        "a_n <= delta c_low n needs delta >= {} on [{k}, {n}]",
                        sa[k] / sc[k]
                    ),
                ),
            )
        }
    };
    let delta = sa[n0] / sc[n0];
    let mut rep = AssumptionReport::new("catastrophes", verdict)
        .constant("b_bar", sb[n0])
        .constant("c_low", sc[n0])
        .constant("delta", delta)
        .constant("n0", n0 as f64);
    rep.n_check = Some(n_check);
    rep.margin = Some(1.0 - delta);
    rep.curve = (1..=n).map(|k| (k as f64, a[k] / c[k])).collect();
    Ok(rep)
}

fn catastrophes_multi(model: &Model, n_check: u64, threshold: f64) -> AssumptionReport {
    let levels = sweep_levels(model.dim(), n_check);
    if levels.is_empty() {
        return empty_range("catastrophes", model, n_check);
    }
    let gamma = model.gamma();
    let ratio = |n: &State| {
        let cmin = (0..model.dim())
            .map(|i| model.competition(i, i, n))
            .fold(f64::INFINITY, f64::min);
        model.catastrophe(n) / (cmin * (n.size() as f64).powf(gamma))
    };
    let (maxs, at) = level_extremes(model, &levels, ratio, false);
    let (verdict, slope) = decay_verdict(&levels, &maxs, &at, threshold, "a(n) / (min_i c_ii |n|^gamma)");
    let mut rep = AssumptionReport::new("catastrophes", verdict)
        .constant("ratio_at_top", *maxs.last().unwrap())
        .constant("log_slope", slope)
        .constant("threshold", threshold);
    rep.n_check = Some(n_check);
    rep.margin = Some(1.0 / threshold - maxs.last().unwrap());
    rep.curve = levels.iter().map(|&s| s as f64).zip(maxs).collect();
    rep
}

/// `M = sup_n sum_k |k| p_{n,k}`: exact over a finite support, the declared
/// mean for state-dependent laws (checked against the law on small states).
pub fn check_multibirth(model: &Model) -> Result<AssumptionReport> {
    let Some(mb) = &model.extensions().multibirth else {
        return Err(invalid_arg("model", "multiple births are not enabled"));
    };
    let mean = |ls: &[crate::model::Litter]| -> f64 {
        ls.iter()
            .map(|l| l.k.iter().sum::<u64>() as f64 * l.p)
            .sum()
    };
    let mut m: f64 = 0.0;
    let mut notes = Vec::new();
    for law in &mb.laws {
        match law {
            LitterLaw::Finite(ls) => m = m.max(mean(ls)),
            LitterLaw::StateDependent { declared_mean: None, .. } => {
                let mut rep = AssumptionReport::new(
                    "multibirth",
                    Verdict::inconclusive("state-dependent litter law without a declared mean"),
                );
                rep.notes.push("declare the supremum of the mean litter size".into());
                return Ok(rep);
            }
            LitterLaw::StateDependent {
                law,
                declared_mean: Some(dm),
            } => {
                if !dm.is_finite() {
                    return Ok(AssumptionReport::new(
                        "multibirth",
                        Verdict::fail(
                            Witness::Parameters(format!("declared mean {dm}")),
                            "mean litter size is unbounded",
                        ),
                    ));
                }
                let level = crate::model::validation_level(model.dim());
                for n in crate::model::interior_states_up_to(model.dim(), level) {
                    let v = mean(&law(&n));
                    if v > dm * (1.0 + 1e-12) {
                        return Ok(AssumptionReport::new(
                            "multibirth",
                            Verdict::fail(
                                Witness::State(n),
                                format!("mean litter size {v} exceeds the declared {dm}"),
                            ),
                        ));
                    }
                }
                notes.push(format!("declared mean {dm} checked up to |n| = {level}"));
                m = m.max(*dm);
            }
        }
    }
    let mut rep = AssumptionReport::new("multibirth", Verdict::PassOnRange).constant("M", m);
    rep.notes = notes;
    Ok(rep)
}
