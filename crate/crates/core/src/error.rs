use thiserror::Error;

use crate::model::State;

/// Errors raised by model construction, the truncation solver and the simulators.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum QsdError {
    #[error("state {0} is not interior (some coordinate is 0)")]
    NotInterior(State),

    #[error("state {state} has dimension {got}, model dimension is {expected}")]
    DimensionMismatch {
        state: State,
        expected: usize,
        got: usize,
    },

    #[error("rate overflow at state {state}: {what} = {value}")]
    RateOverflow {
        state: State,
        what: String,
        value: f64,
    },

    #[error("invalid model at `{key}`: {reason}")]
    InvalidModel { key: String, reason: String },

    #[error("truncation level {level} leaves no interior state in dimension {dim}")]
    EmptySpace { dim: usize, level: u64 },

    #[error("state {0} is outside the truncated space")]
    OutsideSpace(State),

    #[error("power iteration did not converge after {iterations} sweeps (last residual {residual:e})")]
    IterationLimit { iterations: usize, residual: f64 },

    #[error("sub-generator is reducible: state {0} cannot reach every other state")]
    Reducible(State),

    #[error("survival probability underflow ({survival:e}) at t = {t}: conditioning impossible")]
    ConditioningImpossible { t: f64, survival: f64 },

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("no surviving trajectory out of {trials} at t = {t} (survival estimate 0)")]
    NoSurvivors { trials: usize, t: f64 },

    #[error("no rate fit: {0}")]
    NoFit(String),

    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: String, reason: String },
}

pub type Result<T> = std::result::Result<T, QsdError>;

pub(crate) fn invalid_arg(name: &str, reason: impl Into<String>) -> QsdError {
    QsdError::InvalidArgument {
        name: name.to_string(),
        reason: reason.into(),
    }
}
