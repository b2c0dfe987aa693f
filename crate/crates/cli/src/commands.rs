//! One function per subcommand. Each applies its flags to the configuration,
//! runs the computation and writes its files plus `summary.json`.

use std::path::Path;

use serde::Serialize;

use qsd_core::convergence::{certify, convergence_curve, eta_plateau, extreme_initials, uniform_grid, RateFit};
use qsd_core::lyapunov::{
    check_catastrophes, check_conditional_drift, check_drift, check_h1, check_h2, check_multibirth,
    check_remark1, check_thm2, conditional_laws, default_eps, fitted_exponents, AssumptionReport,
    ConditionalDriftOptions, DriftReport, Verdict,
};
use qsd_core::simulation::{
    estimate_conditional, fleming_viot, occupation_measure, simulate_qprocess, QProcessGenerator, RngPlan,
};
use qsd_core::truncation::{
    assemble, enumerate_space, solve_qsd, transient_conditional, QsdResult, SolverOptions, SubGenerator,
    TruncatedSpace,
};
use qsd_core::{Model, State};

use crate::config::Config;
use crate::error::CliResult;
use crate::output::OutDir;
use crate::Command;

#[derive(Serialize)]
struct Summary<'a, R: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config: &'a Config,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rng: Option<&'static str>,
    results: R,
}

fn summary<R: Serialize>(out: &OutDir, command: &'static str, cfg: &Config, seed: Option<u64>, results: R) -> CliResult<()> {
    out.json(
        "summary.json",
        &Summary {
            tool: "qsd",
            version: env!("CARGO_PKG_VERSION"),
            command,
            config: cfg,
            seed,
            rng: seed.map(|_| RngPlan::ALGORITHM),
            results,
        },
    )
}

pub fn dispatch(mut cfg: Config, command: &Command, out: &Path) -> CliResult<()> {
    let out = OutDir::create(out)?;
    match *command {
        Command::Solve { trunc } => {
            cfg.truncation.level = Some(cfg.level(trunc)?);
            solve(&cfg, &out)
        }
        Command::Simulate { t, traj, seed, trunc } => {
            set(&mut cfg.simulation.t_max, t);
            set(&mut cfg.simulation.trajectories, traj);
            set(&mut cfg.simulation.seed, seed);
            cfg.truncation.level = trunc.or(cfg.truncation.level);
            if cfg.simulation.trajectories == 0 {
                return Err(flag_error("simulation.trajectories", "must be >= 1"));
            }
            simulate(&cfg, &out)
        }
        Command::Fv { t, particles, seed, trunc } => {
            set(&mut cfg.simulation.t_max, t);
            set(&mut cfg.simulation.particles, particles);
            set(&mut cfg.simulation.seed, seed);
            cfg.truncation.level = trunc.or(cfg.truncation.level);
            fv(&cfg, &out)
        }
        Command::Qprocess { t, seed, trunc } => {
            set(&mut cfg.simulation.t_max, t);
            set(&mut cfg.simulation.seed, seed);
            cfg.truncation.level = Some(cfg.level(trunc)?);
            qprocess(&cfg, &out)
        }
        Command::Check { nmax, eps, trunc } => {
            set(&mut cfg.check.n_check, nmax);
            cfg.check.eps = eps.or(cfg.check.eps);
            cfg.truncation.level = trunc.or(cfg.truncation.level);
            check(&cfg, &out)
        }
        Command::Converge { trunc, t_max, dt } => {
            cfg.truncation.level = Some(cfg.level(trunc)?);
            set(&mut cfg.converge.t_grid.t_max, t_max);
            set(&mut cfg.converge.t_grid.dt, dt);
            converge(&cfg, &out)
        }
        Command::Certify { trunc, t0, t_max, dt } => {
            cfg.truncation.level = Some(cfg.level(trunc)?);
            set(&mut cfg.converge.t0, t0);
            set(&mut cfg.converge.t_grid.t_max, t_max);
            set(&mut cfg.converge.t_grid.dt, dt);
            certify_cmd(&cfg, &out)
        }
    }
}

fn set<T>(slot: &mut T, flag: Option<T>) {
    if let Some(v) = flag {
        *slot = v;
    }
}

fn flag_error(key: &str, reason: &str) -> crate::CliError {
    crate::CliError::Config {
        key: key.into(),
        reason: reason.into(),
    }
}

struct Solved {
    model: Model,
    space: TruncatedSpace,
    q: SubGenerator,
    qsd: QsdResult,
}

fn solver_options(cfg: &Config) -> SolverOptions {
    SolverOptions {
        tol: cfg.solver.tol,
        max_iter: cfg.solver.max_iter,
    }
}

fn solve_at(cfg: &Config, model: Model, level: u64) -> CliResult<Solved> {
    let space = enumerate_space(model.dim(), level)?;
    let q = assemble(&model, &space)?;
    let qsd = solve_qsd(&q, solver_options(cfg))?;
    Ok(Solved { model, space, q, qsd })
}

fn level_of(cfg: &Config) -> CliResult<u64> {
    cfg.level(None)
}

#[derive(Serialize)]
struct SolveResults {
    level: u64,
    states: usize,
    lambda0: f64,
    left_residual: f64,
    right_residual: f64,
    iterations: usize,
    /// The solver stopped at its rounding floor above `solver.tol`.
    rounding_floor: bool,
    /// Mass of `alpha` on the outer layer `|n| = N`.
    outer_layer_mass: f64,
    /// TV distance between the QSDs at `N` and `2N`, when requested.
    #[serde(skip_serializing_if = "Option::is_none")]
    tv_n_vs_2n: Option<f64>,
}

fn solve(cfg: &Config, out: &OutDir) -> CliResult<()> {
    let level = level_of(cfg)?;
    let s = solve_at(cfg, cfg.build_model()?, level)?;
    let dim = s.model.dim();
    out.distribution("qsd.csv", dim, "mass", s.space.states().iter().zip(s.qsd.alpha.iter().copied()))?;
    out.distribution("eta.csv", dim, "eta", s.space.states().iter().zip(s.qsd.eta.iter().copied()))?;
    let outer_layer_mass = s.space.outer_layer().map(|i| s.qsd.alpha[i]).sum();
    let tv_n_vs_2n = if cfg.truncation.compare_2n {
        let big = solve_at(cfg, s.model.clone(), 2 * level)?;
        let mut embedded = vec![0.0; big.space.len()];
        for (x, a) in s.space.states().iter().zip(&s.qsd.alpha) {
            embedded[big.space.require_index(x)?] = *a;
        }
        Some(qsd_core::convergence::tv_distance(&embedded, &big.qsd.alpha)?)
    } else {
        None
    };
    summary(
        out,
        "solve",
        cfg,
        None,
        SolveResults {
            level,
            states: s.space.len(),
            lambda0: s.qsd.lambda0,
            left_residual: s.qsd.left_residual,
            right_residual: s.qsd.right_residual,
            iterations: s.qsd.iterations,
            rounding_floor: s.qsd.rounding_floor,
            outer_layer_mass,
            tv_n_vs_2n,
        },
    )
}

/// Exact conditional law from `x0` at `t` on the configured truncation.
fn exact_target(cfg: &Config, model: &Model, x0: &State, t: f64) -> CliResult<Option<(TruncatedSpace, Vec<f64>, f64)>> {
    let Some(level) = cfg.truncation.level else {
        return Ok(None);
    };
    let space = enumerate_space(model.dim(), level)?;
    let q = assemble(model, &space)?;
    let (law, survival) = transient_conditional(&q, &space.point_mass(x0)?, t)?;
    Ok(Some((space, law, survival)))
}

#[derive(Serialize)]
struct SimulateResults {
    t: f64,
    x0: State,
    trajectories: usize,
    survivors: usize,
    survival: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    exact_survival: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tv_to_exact: Option<f64>,
}

fn simulate(cfg: &Config, out: &OutDir) -> CliResult<()> {
    let model = cfg.build_model()?;
    let s = &cfg.simulation;
    let x0 = cfg.x0();
    let plan = RngPlan::new(s.seed);
    let est = estimate_conditional(&model, &x0, s.t_max, s.trajectories, &plan)?;
    let law = est.law.normalized();
    out.distribution("law.csv", model.dim(), "mass", law.iter().map(|(x, p)| (x, *p)))?;
    let exact = exact_target(cfg, &model, &x0, s.t_max)?;
    summary(
        out,
        "simulate",
        cfg,
        Some(s.seed),
        SimulateResults {
            t: s.t_max,
            x0,
            trajectories: est.trials,
            survivors: est.survivors,
            survival: est.survival(),
            exact_survival: exact.as_ref().map(|e| e.2),
            tv_to_exact: exact.as_ref().map(|(space, p, _)| est.law.tv_to(space, p)),
        },
    )
}

#[derive(Serialize)]
struct FvResults {
    t: f64,
    x0: State,
    particles: usize,
    resamplings: u64,
    events: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    tv_to_exact: Option<f64>,
}

fn fv(cfg: &Config, out: &OutDir) -> CliResult<()> {
    let model = cfg.build_model()?;
    let s = &cfg.simulation;
    let x0 = cfg.x0();
    let run = fleming_viot(&model, &x0, s.particles, s.t_max, &RngPlan::new(s.seed))?;
    let law = run.law.normalized();
    out.distribution("fv_law.csv", model.dim(), "mass", law.iter().map(|(x, p)| (x, *p)))?;
    let exact = exact_target(cfg, &model, &x0, s.t_max)?;
    summary(
        out,
        "fv",
        cfg,
        Some(s.seed),
        FvResults {
            t: s.t_max,
            x0,
            particles: s.particles,
            resamplings: run.resamplings,
            events: run.events,
            tv_to_exact: exact.as_ref().map(|(space, p, _)| run.law.tv_to(space, p)),
        },
    )
}

#[derive(Serialize)]
struct QprocessResults {
    t: f64,
    x0: State,
    jumps: usize,
    /// Largest `|row sum|` of the transformed generator.
    max_row_sum: f64,
    /// TV distance of the occupation measure to `alpha * eta`.
    tv_to_stationary: f64,
}

fn qprocess(cfg: &Config, out: &OutDir) -> CliResult<()> {
    let s = solve_at(cfg, cfg.build_model()?, level_of(cfg)?)?;
    let sim = &cfg.simulation;
    let x0 = cfg.x0();
    let gen = QProcessGenerator::new(&s.q, &s.qsd)?;
    let max_row_sum = gen.row_sums().iter().fold(0.0f64, |m, r| m.max(r.abs()));
    let traj = simulate_qprocess(&s.model, &s.qsd, &s.space, &x0, sim.t_max, &RngPlan::new(sim.seed), 0)?;
    let occ = occupation_measure(&traj, sim.t_max);
    let law = occ.normalized();
    out.distribution("occupation.csv", s.model.dim(), "mass", law.iter().map(|(x, p)| (x, *p)))?;
    summary(
        out,
        "qprocess",
        cfg,
        Some(sim.seed),
        QprocessResults {
            t: sim.t_max,
            x0,
            jumps: traj.events.len(),
            max_row_sum,
            tv_to_stationary: occ.tv_to(&s.space, &s.qsd.qprocess_stationary()),
        },
    )
}

#[derive(Serialize)]
struct DriftDocument {
    pointwise: DriftReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    conditional: Option<DriftReport>,
}

#[derive(Serialize)]
struct VerdictLine {
    check: String,
    verdict: &'static str,
}

fn verdict_name(v: &Verdict) -> &'static str {
    match v {
        Verdict::PassOnRange => "pass-on-range",
        Verdict::Fail { .. } => "fail",
        Verdict::Inconclusive { .. } => "inconclusive",
    }
}

fn check(cfg: &Config, out: &OutDir) -> CliResult<()> {
    let model = cfg.build_model()?;
    let c = &cfg.check;
    let n = c.n_check;
    let mut reports: Vec<AssumptionReport> = vec![
        check_h1(&model, n),
        check_h2(&model, n, c.threshold),
        check_remark1(&model, n, c.c_r, c.threshold),
        check_thm2(&model, n),
    ];
    if model.extensions().catastrophe.is_some() {
        reports.push(check_catastrophes(&model, n, c.threshold)?);
    }
    if model.extensions().multibirth.is_some() {
        reports.push(check_multibirth(&model)?);
    }
    let beta2 = fitted_exponents(&model, n).beta2;
    let eps = c.eps.unwrap_or_else(|| default_eps(model.gamma(), beta2));
    let pointwise = check_drift(&model, eps, n)?;
    let conditional = match cfg.truncation.level {
        Some(level) => {
            let space = enumerate_space(model.dim(), level)?;
            let q = assemble(&model, &space)?;
            let laws = conditional_laws(&q, &space.point_mass(&cfg.x0())?, c.prop1_dt, c.prop1_t_max)?;
            Some(check_conditional_drift(&model, &space, &laws, ConditionalDriftOptions::new(eps, beta2))?)
        }
        None => None,
    };
    let mut lines: Vec<VerdictLine> = reports
        .iter()
        .map(|r| VerdictLine {
            check: r.hypothesis.clone(),
            verdict: verdict_name(&r.verdict),
        })
        .collect();
    lines.push(VerdictLine {
        check: "drift".into(),
        verdict: verdict_name(&pointwise.verdict),
    });
    if let Some(cd) = &conditional {
        lines.push(VerdictLine {
            check: "conditional-drift".into(),
            verdict: verdict_name(&cd.verdict),
        });
    }
    out.json("assumptions.json", &reports)?;
    out.json("drift.json", &DriftDocument { pointwise, conditional })?;
    #[derive(Serialize)]
    struct CheckResults {
        n_check: u64,
        eps: f64,
        verdicts: Vec<VerdictLine>,
    }
    summary(out, "check", cfg, None, CheckResults { n_check: n, eps, verdicts: lines })
}

#[derive(Serialize)]
struct FitLine {
    initial: State,
    #[serde(skip_serializing_if = "Option::is_none")]
    fit: Option<RateFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

fn converge(cfg: &Config, out: &OutDir) -> CliResult<()> {
    let s = solve_at(cfg, cfg.build_model()?, level_of(cfg)?)?;
    let mut initials: Vec<State> = match &cfg.converge.initials {
        Some(list) => list.iter().map(|x| State::new(x.clone())).collect(),
        None => extreme_initials(&s.space),
    };
    initials.sort();
    initials.dedup();
    let g = cfg.converge.t_grid;
    let grid = uniform_grid(g.t_max, g.dt)?;
    let curve = convergence_curve(&s.q, &s.qsd, &initials, &grid)?;
    let rows = |table: &Vec<Vec<f64>>| -> Vec<(f64, f64, Option<&State>)> {
        curve
            .initials
            .iter()
            .zip(table)
            .flat_map(|(x, vals)| grid.iter().zip(vals).map(move |(t, v)| (*t, *v, Some(x))))
            .collect()
    };
    out.curve("tv.csv", rows(&curve.tv))?;
    out.curve("survival.csv", rows(&curve.survival))?;
    let plateau = eta_plateau(&s.q, &s.qsd, &grid)?;
    out.curve("plateau.csv", plateau.iter().map(|(t, e)| (*t, *e, None)))?;
    let fits: Vec<FitLine> = curve
        .initials
        .iter()
        .zip(curve.fits())
        .map(|(x, f)| match f {
            Ok(fit) => FitLine {
                initial: x.clone(),
                fit: Some(fit),
                error: None,
            },
            Err(e) => FitLine {
                initial: x.clone(),
                fit: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    #[derive(Serialize)]
    struct ConvergeResults {
        lambda0: f64,
        survival_nonincreasing: bool,
        fits: Vec<FitLine>,
    }
    summary(
        out,
        "converge",
        cfg,
        None,
        ConvergeResults {
            lambda0: s.qsd.lambda0,
            survival_nonincreasing: curve.survival_nonincreasing(),
            fits,
        },
    )
}

fn certify_cmd(cfg: &Config, out: &OutDir) -> CliResult<()> {
    let model = cfg.build_model()?;
    let space = enumerate_space(model.dim(), level_of(cfg)?)?;
    let q = assemble(&model, &space)?;
    let g = cfg.converge.t_grid;
    let cert = certify(&q, cfg.converge.t0, &uniform_grid(g.t_max, g.dt)?)?;
    out.json("certificate.json", &cert)?;
    #[derive(Serialize)]
    struct CertifyResults {
        a1_valid: bool,
        a2_valid: bool,
    }
    summary(
        out,
        "certify",
        cfg,
        None,
        CertifyResults {
            a1_valid: cert.a1_valid(),
            a2_valid: cert.a2_valid(),
        },
    )
}
