//! TOML configuration: parsing, defaults and validation.

use std::path::Path;

use serde::{Deserialize, Serialize};

use qsd_core::model::{
    Coefficient, ExtensionSpec, Litter, LitterLaw, MultiBirth, PowerBase, PowerTerm, RateSpec,
};
use qsd_core::{Model, State};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub model: ModelSection,
    #[serde(default)]
    pub extensions: ExtensionsSection,
    #[serde(default)]
    pub truncation: TruncationSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub simulation: SimulationSection,
    #[serde(default)]
    pub check: CheckSection,
    #[serde(default)]
    pub converge: ConvergeSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    #[default]
    Constant,
    PowerLaw,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub r: usize,
    pub gamma: f64,
    #[serde(default)]
    pub family: Family,
    pub b: Vec<CoefSpec>,
    pub d: Vec<CoefSpec>,
    pub c: Vec<Vec<CoefSpec>>,
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
}

/// A number, or `{ coef, exponent, shift = 0, base = "total" }` for
/// `coef (shift + base(n))^exponent`; `base` is `"total"` or `"n1"`, `"n2"`, ...
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CoefSpec {
    Constant(f64),
    Power(PowerSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerSpec {
    pub coef: f64,
    pub exponent: f64,
    #[serde(default)]
    pub shift: f64,
    #[serde(default = "default_base")]
    pub base: String,
}

fn default_base() -> String {
    "total".into()
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtensionsSection {
    /// Catastrophe rate `a(n)`.
    pub catastrophe: Option<CoefSpec>,
    /// Litter law shared by all types.
    pub multibirth: Option<Vec<LitterSpec>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LitterSpec {
    pub k: Vec<u64>,
    pub p: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncationSection {
    #[serde(rename = "N")]
    pub level: Option<u64>,
    /// Also solve at `2N` and report the TV distance between the two QSDs.
    #[serde(default)]
    pub compare_2n: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_tol() -> f64 {
    qsd_core::truncation::DEFAULT_TOL
}

fn default_max_iter() -> usize {
    qsd_core::truncation::DEFAULT_MAX_ITER
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            tol: default_tol(),
            max_iter: default_max_iter(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_trajectories")]
    pub trajectories: usize,
    #[serde(default = "default_particles")]
    pub particles: usize,
    #[serde(default = "default_sim_t")]
    pub t_max: f64,
    /// Initial state; `(1, ..., 1)` when absent.
    pub x0: Option<Vec<u64>>,
}

fn default_trajectories() -> usize {
    100_000
}

fn default_particles() -> usize {
    10_000
}

fn default_sim_t() -> f64 {
    3.0
}

impl Default for SimulationSection {
    fn default() -> Self {
        SimulationSection {
            seed: 0,
            trajectories: default_trajectories(),
            particles: default_particles(),
            t_max: default_sim_t(),
            x0: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSection {
    #[serde(default = "default_n_check")]
    pub n_check: u64,
    /// Defaults to the midpoint of the admissible window.
    pub eps: Option<f64>,
    #[serde(rename = "C_r")]
    pub c_r: Option<f64>,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    /// Horizon and step of the conditional drift check (needs `truncation.N`).
    #[serde(default = "default_prop1_t")]
    pub prop1_t_max: f64,
    #[serde(default = "default_prop1_dt")]
    pub prop1_dt: f64,
}

fn default_n_check() -> u64 {
    10_000
}

fn default_threshold() -> f64 {
    qsd_core::lyapunov::DEFAULT_GROWTH_THRESHOLD
}

fn default_prop1_t() -> f64 {
    5.0
}

fn default_prop1_dt() -> f64 {
    0.01
}

impl Default for CheckSection {
    fn default() -> Self {
        CheckSection {
            n_check: default_n_check(),
            eps: None,
            c_r: None,
            threshold: default_threshold(),
            prop1_t_max: default_prop1_t(),
            prop1_dt: default_prop1_dt(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergeSection {
    /// Initial states; the extremes of the truncation when absent.
    pub initials: Option<Vec<Vec<u64>>>,
    #[serde(default = "default_t_grid")]
    pub t_grid: TimeGridSpec,
    #[serde(default = "default_t0")]
    pub t0: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGridSpec {
    pub t_max: f64,
    pub dt: f64,
}

fn default_t_grid() -> TimeGridSpec {
    TimeGridSpec {
        t_max: qsd_core::convergence::DEFAULT_T_MAX,
        dt: qsd_core::convergence::DEFAULT_DT,
    }
}

fn default_t0() -> f64 {
    2.0
}

impl Default for ConvergeSection {
    fn default() -> Self {
        ConvergeSection {
            initials: None,
            t_grid: default_t_grid(),
            t0: default_t0(),
        }
    }
}

fn invalid(key: &str, reason: impl Into<String>) -> CliError {
    CliError::Config {
        key: key.to_string(),
        reason: reason.into(),
    }
}

impl Config {
    pub fn load(path: &Path) -> CliResult<Config> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Config::parse(&text)
    }

    pub fn parse(text: &str) -> CliResult<Config> {
        let cfg: Config = toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> CliResult<()> {
        let m = &self.model;
        if m.r == 0 {
            return Err(invalid("model.r", "must be >= 1"));
        }
        if !(m.gamma > 0.0 && m.gamma.is_finite()) {
            return Err(invalid("model.gamma", format!("gamma must be > 0, got {}", m.gamma)));
        }
        if let Some(b2) = m.beta2 {
            if !(b2 < 1.0) {
                return Err(invalid("model.beta2", format!("beta2 must be < 1, got {b2}")));
            }
        }
        for (key, v) in [("model.b", &m.b), ("model.d", &m.d)] {
            if v.len() != m.r {
                return Err(invalid(key, format!("expected {} entries, got {}", m.r, v.len())));
            }
        }
        if m.c.len() != m.r || m.c.iter().any(|row| row.len() != m.r) {
            return Err(invalid("model.c", format!("expected a {0}x{0} matrix", m.r)));
        }
        let all = m.b.iter().chain(&m.d).chain(m.c.iter().flatten());
        for spec in all.chain(&self.extensions.catastrophe) {
            if let CoefSpec::Power(p) = spec {
                if m.family == Family::Constant {
                    return Err(invalid(
                        "model.family",
                        "power-law coefficient given with family = \"constant\"",
                    ));
                }
                parse_base(&p.base, m.r)?;
            }
        }
        if let Some(level) = self.truncation.level {
            if level < m.r as u64 {
                return Err(invalid("truncation.N", format!("must be >= r = {}, got {level}", m.r)));
            }
        }
        if !(self.solver.tol > 0.0) {
            return Err(invalid("solver.tol", "must be > 0"));
        }
        if self.solver.max_iter == 0 {
            return Err(invalid("solver.max_iter", "must be >= 1"));
        }
        let s = &self.simulation;
        if s.trajectories == 0 {
            return Err(invalid("simulation.trajectories", "must be >= 1"));
        }
        if s.particles < 2 {
            return Err(invalid("simulation.particles", "must be >= 2"));
        }
        if !(s.t_max >= 0.0 && s.t_max.is_finite()) {
            return Err(invalid("simulation.t_max", "must be finite and >= 0"));
        }
        if let Some(x0) = &s.x0 {
            check_state("simulation.x0", x0, m.r)?;
        }
        let c = &self.check;
        if c.n_check < m.r as u64 {
            return Err(invalid("check.n_check", format!("must be >= r = {}", m.r)));
        }
        if let Some(eps) = c.eps {
            if !(eps > 0.0) {
                return Err(invalid("check.eps", "must be > 0"));
            }
        }
        if let Some(cr) = c.c_r {
            if !(cr > 0.0) {
                return Err(invalid("check.C_r", "must be > 0"));
            }
        }
        if !(c.prop1_dt > 0.0) || !(c.prop1_t_max > 0.0) {
            return Err(invalid("check.prop1_dt", "prop1_dt and prop1_t_max must be > 0"));
        }
        let v = &self.converge;
        if let Some(init) = &v.initials {
            for x in init {
                check_state("converge.initials", x, m.r)?;
            }
        }
        if !(v.t_grid.dt > 0.0) || !(v.t_grid.t_max >= 0.0) {
            return Err(invalid("converge.t_grid", "need dt > 0 and t_max >= 0"));
        }
        if !(v.t0 >= 0.0) {
            return Err(invalid("converge.t0", "must be >= 0"));
        }
        if let Some(litters) = &self.extensions.multibirth {
            if litters.is_empty() {
                return Err(invalid("extensions.multibirth", "empty litter table"));
            }
        }
        Ok(())
    }

    /// Builds and validates the model.
    pub fn build_model(&self) -> CliResult<Model> {
        let m = &self.model;
        let coef = |s: &CoefSpec| -> CliResult<Coefficient> {
            Ok(match s {
                CoefSpec::Constant(v) => Coefficient::Constant(*v),
                CoefSpec::Power(p) => PowerTerm {
                    coef: p.coef,
                    exponent: p.exponent,
                    shift: p.shift,
                    base: parse_base(&p.base, m.r)?,
                }
                .into(),
            })
        };
        let rates = RateSpec {
            birth: m.b.iter().map(coef).collect::<CliResult<_>>()?,
            death: m.d.iter().map(coef).collect::<CliResult<_>>()?,
            competition: m
                .c
                .iter()
                .map(|row| row.iter().map(coef).collect::<CliResult<Vec<_>>>())
                .collect::<CliResult<_>>()?,
            declared: Default::default(),
        }
        .with_exponents(m.beta1, m.beta2);
        let ext = ExtensionSpec {
            catastrophe: self.extensions.catastrophe.as_ref().map(coef).transpose()?,
            multibirth: self.extensions.multibirth.as_ref().map(|ls| {
                MultiBirth::shared(LitterLaw::Finite(
                    ls.iter()
                        .map(|l| Litter {
                            k: l.k.clone(),
                            p: l.p,
                        })
                        .collect(),
                ))
            }),
        };
        Ok(Model::new(m.gamma, rates, ext)?)
    }

    /// `truncation.N`, overridden by `flag`.
    pub fn level(&self, flag: Option<u64>) -> CliResult<u64> {
        let level = flag
            .or(self.truncation.level)
            .ok_or_else(|| invalid("truncation.N", "required by this command (or pass --trunc)"))?;
        if level < self.model.r as u64 {
            return Err(invalid("truncation.N", format!("must be >= r = {}, got {level}", self.model.r)));
        }
        Ok(level)
    }

    pub fn x0(&self) -> State {
        match &self.simulation.x0 {
            Some(x) => State::new(x.clone()),
            None => State::ones(self.model.r),
        }
    }
}

fn parse_base(base: &str, r: usize) -> CliResult<PowerBase> {
    if base == "total" {
        return Ok(PowerBase::Total);
    }
    match base.strip_prefix('n').and_then(|i| i.parse::<usize>().ok()) {
        Some(i) if (1..=r).contains(&i) => Ok(PowerBase::Coord(i - 1)),
        _ => Err(invalid(
            "model.base",
            format!("base must be \"total\" or one of n1..n{r}, got {base:?}"),
        )),
    }
}

fn check_state(key: &str, x: &[u64], r: usize) -> CliResult<()> {
    if x.len() != r {
        return Err(invalid(key, format!("state {x:?} has {} coordinates, expected {r}", x.len())));
    }
    if x.contains(&0) {
        return Err(invalid(key, format!("state {x:?} is not interior")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const LOGISTIC: &str = r#"
[model]
r = 1
gamma = 1.0
b = [1.0]
d = [0.0]
c = [[1.0]]
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = Config::parse(LOGISTIC).unwrap();
        assert_eq!(cfg.solver.tol, 1e-12);
        assert_eq!(cfg.check.n_check, 10_000);
        assert_eq!(cfg.truncation.level, None);
        assert_eq!(cfg.level(Some(50)).unwrap(), 50);
        assert!(cfg.level(None).is_err());
        assert_eq!(cfg.x0(), State::from([1]));
        cfg.build_model().unwrap();
    }

    #[test]
    fn rejects_bad_values() {
        let bad_gamma = LOGISTIC.replace("gamma = 1.0", "gamma = 0.0");
        assert!(matches!(Config::parse(&bad_gamma), Err(CliError::Config { key, .. }) if key == "model.gamma"));
        let bad_beta = format!("{LOGISTIC}beta2 = 1.5\n");
        assert!(matches!(Config::parse(&bad_beta), Err(CliError::Config { key, .. }) if key == "model.beta2"));
        let short = LOGISTIC.replace("b = [1.0]", "b = []");
        assert!(matches!(Config::parse(&short), Err(CliError::Config { key, .. }) if key == "model.b"));
    }

    #[test]
    fn rejects_unknown_keys() {
        let extra = format!("{LOGISTIC}colour = 3\n");
        let err = Config::parse(&extra).unwrap_err();
        assert!(matches!(err, CliError::Parse(ref m) if m.contains("colour")), "{err}");
        let section = format!("{LOGISTIC}[plotting]\nwidth = 3\n");
        assert!(Config::parse(&section).is_err());
    }

    #[test]
    fn parse_error_has_line_number() {
        let err = Config::parse("[model]\nr = \n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn power_law_family() {
        let text = r#"
[model]
r = 2
gamma = 1.0
family = "power-law"
b = [4.0, 4.0]
d = [0.0, 0.0]
c = [[2.0, { coef = 0.1, exponent = -0.5, shift = 1.0 }], [{ coef = 0.1, exponent = -0.5, shift = 1.0 }, 2.0]]
"#;
        let m = Config::parse(text).unwrap().build_model().unwrap();
        assert!((m.competition(0, 1, &State::from([1, 2])) - 0.05).abs() < 1e-15);
        let constant = text.replace("family = \"power-law\"\n", "");
        assert!(matches!(Config::parse(&constant), Err(CliError::Config { key, .. }) if key == "model.family"));
    }

    #[test]
    fn extensions_parse() {
        let text = format!(
            "{LOGISTIC}[extensions]\ncatastrophe = 0.5\nmultibirth = [{{ k = [1], p = 0.5 }}, {{ k = [2], p = 0.5 }}]\n"
        );
        let m = Config::parse(&text).unwrap().build_model().unwrap();
        assert_eq!(m.catastrophe(&State::from([3])), 0.5);
        let bad = format!("{LOGISTIC}[extensions]\nmultibirth = [{{ k = [1], p = 0.4 }}]\n");
        let err = Config::parse(&bad).unwrap().build_model().unwrap_err();
        assert!(err.to_string().contains("extensions.multibirth"), "{err}");
    }
}
