//! `wallreg`: generate benchmark datasets, train regressors, emit
//! submissions and score them.
//!
//! Logs go to stderr, results to files. Exit codes: 0 ok, 1 numerical or
//! other failure, 2 configuration, 3 I/O or malformed input, 4 submission
//! rejected.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use wallreg_core::Error;

use config::RunConfig;

pub const EXIT_OTHER: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_IO: u8 = 3;
pub const EXIT_SUBMISSION: u8 = 4;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn config(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_IO,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Invalid { .. } => EXIT_CONFIG,
            Error::Io { .. } | Error::Schema { .. } | Error::Structure(_) | Error::MissingField(_) => EXIT_IO,
            Error::Submission(_) => EXIT_SUBMISSION,
            Error::Domain(_) | Error::Numerical(_) | Error::Diverged { .. } | Error::Serde(_) => EXIT_OTHER,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "wallreg", version, about = "Wall-field regression benchmark harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct Common {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    regressor: Option<String>,
    #[arg(long, global = true)]
    dataset: Option<PathBuf>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    model: Option<PathBuf>,
    #[arg(long, global = true)]
    submission: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic dataset with its split and manifest to --out.
    Generate(Common),
    /// Re-split --dataset with --seed, writing to --out (default: in place).
    Split(Common),
    /// Fit --regressor on the train split; writes the model file.
    Train(Common),
    /// Predict every test condition; writes the submission directory.
    Predict(Common),
    /// Score a submission against the test truth; writes scores.json/.txt.
    Evaluate(Common),
    /// Compare several score files side by side.
    Report {
        #[command(flatten)]
        common: Common,
        /// scores.json files; each is labelled by its parent directory.
        #[arg(required = true)]
        scores: Vec<PathBuf>,
    },
    /// Print (M, p_i, Re) over the DoE.
    Reynolds(Common),
    /// Random search (mlp_pointwise) or neighbor-count selection (knn).
    Tune(Common),
}

fn resolve(common: &Common) -> Result<RunConfig, Failure> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(r) = &common.regressor {
        cfg.regressor = Some(r.clone());
    }
    for (flag, slot) in [
        (&common.dataset, &mut cfg.dataset),
        (&common.out, &mut cfg.out),
        (&common.model, &mut cfg.model),
        (&common.submission, &mut cfg.submission),
    ] {
        if let Some(p) = flag {
            *slot = Some(p.clone());
        }
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Generate(c) => commands::generate(&resolve(&c)?),
        Command::Split(c) => commands::split(&resolve(&c)?),
        Command::Train(c) => commands::train(&resolve(&c)?),
        Command::Predict(c) => commands::predict(&resolve(&c)?),
        Command::Evaluate(c) => commands::evaluate(&resolve(&c)?),
        Command::Report { common, scores } => commands::report(&resolve(&common)?, &scores),
        Command::Reynolds(c) => commands::reynolds(&resolve(&c)?),
        Command::Tune(c) => commands::tune(&resolve(&c)?),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
