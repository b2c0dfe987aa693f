//! Quasi-stationary analysis of multi-type competitive birth-death processes.
//!
//! * [`model`]: states, rates and transition enumeration, including
//!   catastrophes and multiple births.
//! * [`truncation`]: killed sub-generator on `{|n| <= N}`, quasi-stationary
//!   distribution, transient conditional laws, hitting times.
//! * [`convergence`]: TV convergence curves, rate fits, (A1)/(A2)
//!   certificates and the `eta` plateau.
//! * [`lyapunov`]: `V_eps`, the generator action, hypothesis and drift
//!   certificates on finite ranges.
//! * [`reference`]: the small reference instances.
//! * [`simulation`]: Gillespie paths, naive conditioning, Fleming-Viot and
//!   the Q-process.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod convergence;
pub mod error;
pub mod lyapunov;
pub mod model;
pub mod reference;
pub mod simulation;
pub mod truncation;

pub use error::{QsdError, Result};
pub use model::{is_absorbed, Model, State, Transition};
