//! `kbqp`: data generation, identification, condensing, solving, closed-loop
//! simulation and iteration-bound benchmarking for the Koopman BoxQP pipeline.

mod bench;
mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use koopman_boxqp::boxqp::SolverError;
use koopman_boxqp::condensing::CondenseError;
use koopman_boxqp::kdv::KdvError;
use koopman_boxqp::koopman::EdmdError;

#[derive(Parser, Debug)]
#[command(name = "kbqp", version, about = "Certified BoxQP solver and Koopman MPC pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Experiment config (JSON); built-in KdV defaults when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate random-excitation KdV trajectories into a snapshot CSV.
    GenData {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: Option<u64>,
        /// Override the number of trajectories.
        #[arg(long)]
        trajectories: Option<usize>,
    },
    /// Fit a lifted linear predictor by EDMD.
    Fit {
        #[command(flatten)]
        common: Common,
        /// Snapshot CSV written by `gen-data`.
        #[arg(long)]
        data: PathBuf,
        /// Seed for the RBF centers.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Build the relaxed BoxQP for one state and dump it with its E/F sidecar.
    Condense {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
        /// JSON array with the plant state; zero state when omitted.
        #[arg(long)]
        state: Option<PathBuf>,
        /// Time at which the reference is evaluated.
        #[arg(long, default_value_t = 0.0)]
        time: f64,
        #[arg(long)]
        rho: Option<f64>,
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Solve a BoxQP problem file.
    Solve {
        /// Problem JSON (`condense` output or hand written).
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the tolerance stored in the problem file.
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long, value_parser = ["auto", "dense", "structured"], default_value = "auto")]
        backend: String,
    },
    /// Closed-loop Koopman MPC on the KdV plant.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
        /// Simulated seconds.
        #[arg(long)]
        duration: Option<f64>,
        #[arg(long)]
        rho: Option<f64>,
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Certificate vs observed iterations and backend timings on random
    /// Koopman-structured instances.
    Bench {
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated shapes `N:n_u:n_x`.
        #[arg(long, default_value = "10:4:100")]
        shapes: String,
        #[arg(long, default_value_t = 5)]
        instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        rho: Option<f64>,
    },
}

/// Config or input file does not match the expected schema.
#[derive(Debug)]
pub struct SchemaError(pub String);

impl std::fmt::Display for SchemaError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "schema error: {}", self.0)
    }
}

impl std::error::Error for SchemaError {}

/// A solve used up its certified iteration budget without reaching ε.
#[derive(Debug)]
pub struct CertificateExhausted(pub String);

impl std::fmt::Display for CertificateExhausted {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "certificate exhausted: {}", self.0)
    }
}

impl std::error::Error for CertificateExhausted {}

pub const EXIT_OTHER: u8 = 1;
pub const EXIT_SCHEMA: u8 = 2;
pub const EXIT_BREAKDOWN: u8 = 3;
pub const EXIT_CERTIFICATE: u8 = 4;

fn solver_exit_code(e: &SolverError) -> u8 {
    match e {
        SolverError::NumericalBreakdown { .. } | SolverError::FactorizationFailed => EXIT_BREAKDOWN,
        SolverError::Dimension(_) | SolverError::InvalidTolerance { .. } => EXIT_SCHEMA,
        _ => EXIT_OTHER,
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<SchemaError>() || cause.is::<serde_json::Error>() {
            return EXIT_SCHEMA;
        }
        if cause.is::<CertificateExhausted>() {
            return EXIT_CERTIFICATE;
        }
        if let Some(e) = cause.downcast_ref::<SolverError>() {
            return solver_exit_code(e);
        }
        // transparent wrappers hide the solver error from the source chain
        if let Some(CondenseError::Solver(e)) = cause.downcast_ref::<CondenseError>() {
            return solver_exit_code(e);
        }
        match cause.downcast_ref::<KdvError>() {
            Some(KdvError::BlowUp { .. }) => return EXIT_BREAKDOWN,
            Some(KdvError::Solver { source, .. }) => return solver_exit_code(source),
            Some(KdvError::Condense(CondenseError::Solver(e))) => return solver_exit_code(e),
            Some(KdvError::Config(_) | KdvError::Dimension(_)) => return EXIT_SCHEMA,
            _ => {}
        }
        if let Some(EdmdError::Parse(_) | EdmdError::Dimension(_)) = cause.downcast_ref::<EdmdError>() {
            return EXIT_SCHEMA;
        }
    }
    EXIT_OTHER
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenData { common, seed, trajectories } => commands::gen_data(&common, seed, trajectories),
        Command::Fit { common, data, seed } => commands::fit(&common, &data, seed),
        Command::Condense { common, model, state, time, rho, horizon, epsilon } => {
            commands::condense(&common, &model, state.as_deref(), time, rho, horizon, epsilon)
        }
        Command::Solve { problem, out, epsilon, backend } => commands::solve(&problem, &out, epsilon, &backend),
        Command::Simulate { common, model, duration, rho, horizon, epsilon } => {
            commands::simulate(&common, &model, duration, rho, horizon, epsilon)
        }
        Command::Bench { out, shapes, instances, seed, epsilon, rho } => {
            bench::run(&out, &shapes, instances, seed, epsilon, rho)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
