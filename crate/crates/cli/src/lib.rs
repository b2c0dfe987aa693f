//! The `qsd` command line: configuration loading, dispatch and file output.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::Config;
pub use error::{CliError, CliResult};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "QSD_OUT_DIR";
const DEFAULT_OUT_DIR: &str = "qsd-out";

#[derive(Debug, Parser)]
#[command(name = "qsd", version, about = "Quasi-stationary analysis of competitive birth-death processes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub global: GlobalArgs,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory [default: $QSD_OUT_DIR, else ./qsd-out].
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Upper bound on worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// QSD, extinction rate and eigenfunction on the truncation.
    Solve {
        #[arg(long)]
        trunc: Option<u64>,
    },
    /// Naive conditioning: independent paths, histogram of the survivors.
    Simulate {
        #[arg(long)]
        t: Option<f64>,
        #[arg(long)]
        traj: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Also compare with the exact conditional law on this truncation.
        #[arg(long)]
        trunc: Option<u64>,
    },
    /// Fleming-Viot particle system.
    Fv {
        #[arg(long)]
        t: Option<f64>,
        #[arg(long)]
        particles: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trunc: Option<u64>,
    },
    /// One long Q-process path and its occupation measure.
    Qprocess {
        #[arg(long)]
        t: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trunc: Option<u64>,
    },
    /// Hypotheses and drift inequalities on a finite range.
    Check {
        #[arg(long)]
        nmax: Option<u64>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        trunc: Option<u64>,
    },
    /// TV convergence curves, rate fits and the eta plateau.
    Converge {
        #[arg(long)]
        trunc: Option<u64>,
        #[arg(long)]
        t_max: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
    },
    /// (A1)/(A2) mixing certificate.
    Certify {
        #[arg(long)]
        trunc: Option<u64>,
        #[arg(long)]
        t0: Option<f64>,
        #[arg(long)]
        t_max: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Solve { .. } => "solve",
            Command::Simulate { .. } => "simulate",
            Command::Fv { .. } => "fv",
            Command::Qprocess { .. } => "qprocess",
            Command::Check { .. } => "check",
            Command::Converge { .. } => "converge",
            Command::Certify { .. } => "certify",
        }
    }
}

/// Parses `argv`, runs the command and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: Cli) -> CliResult<()> {
    let path = cli.global.config.clone().ok_or_else(|| CliError::Config {
        key: "--config".into(),
        reason: "a configuration file is required".into(),
    })?;
    let cfg = Config::load(&path)?;
    let out = cli
        .global
        .out
        .clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.global.threads {
        if n == 0 {
            return Err(CliError::Config {
                key: "--threads".into(),
                reason: "must be >= 1".into(),
            });
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| CliError::Config {
        key: "--threads".into(),
        reason: e.to_string(),
    })?;
    pool.install(|| commands::dispatch(cfg, &cli.command, &out))
}
