//! `g2flow`: metric, instanton classification and Taub-NUT runs from the
//! command line.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 numerical failure.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;

#[derive(Debug, Parser)]
#[command(
    name = "g2flow",
    version,
    about = "G2-instantons on the B7 family of ALC G2-metrics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Flat key-value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `directory`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long = "rel-tol", global = true)]
    rel_tol: Option<f64>,
    #[arg(long = "t-max", global = true)]
    t_max: Option<f64>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Flow a B7 metric and fit its asymptotic circle length.
    Metric,
    /// Classify a lattice of instanton initial conditions.
    Scan,
    /// Locate the complete/incomplete boundary on given rows.
    Boundary,
    /// Closed-form Taub-NUT metric and ASD instantons.
    Taubnut,
    /// Compare rescaled instantons with their Taub-NUT limit.
    Adiabatic,
    /// Shoot back from asymptotic data to initial conditions.
    Endshoot,
}

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Numerical(String),
    Io(String),
}

impl Failure {
    pub fn from_io(e: g2flow::Error) -> Self {
        Failure::Io(e.to_string())
    }

    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Numerical(_) | Failure::Io(_) => 2,
        }
    }
}

impl From<g2flow::Error> for Failure {
    fn from(e: g2flow::Error) -> Self {
        Failure::Numerical(e.to_string())
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "error: {m}"),
            Failure::Numerical(m) => write!(f, "numerical failure: {m}"),
            Failure::Io(m) => write!(f, "i/o failure: {m}"),
        }
    }
}

fn resolve(cli: &Cli) -> Result<RunConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p).map_err(Failure::Usage)?,
        None => RunConfig::default(),
    };
    if let Some(d) = &cli.out {
        cfg.directory = Some(d.clone());
    }
    if cli.rel_tol.is_some() {
        cfg.rel_tol = cli.rel_tol;
    }
    if cli.t_max.is_some() {
        cfg.t_max = cli.t_max;
    }
    cfg.validate().map_err(Failure::Usage)?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let cfg = resolve(cli)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    match cli.jobs {
        Some(0) => return Err(Failure::Usage("--jobs must be at least 1".into())),
        Some(n) => pool = pool.num_threads(n),
        None => {}
    }
    let pool = pool
        .build()
        .map_err(|e| Failure::Usage(format!("worker pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Metric => commands::metric(&cfg),
        Command::Scan => commands::scan(&cfg),
        Command::Boundary => commands::boundary(&cfg),
        Command::Taubnut => commands::taubnut(&cfg),
        Command::Adiabatic => commands::adiabatic(&cfg),
        Command::Endshoot => commands::endshoot(&cfg),
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{f}");
            ExitCode::from(f.code())
        }
    }
}
