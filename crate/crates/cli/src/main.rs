//! `qtn`: train, evaluate and benchmark quantized tensor-network kernel
//! machines from a TOML run configuration.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qtn_core::config::RunConfig;
use qtn_core::ErrorClass;

#[derive(Debug, Parser)]
#[command(name = "qtn", version, about = "Quantized tensor-network kernel machines")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, clap::Args)]
struct Paths {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, default_value = "qtn-out")]
    out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a CPD model and write weights, scaling and training report.
    Train(Paths),
    /// Predict targets for the rows of `predict.input`.
    Predict(Paths),
    /// Score a trained model on `predict.input` or on the held-out split.
    Eval(Paths),
    /// Cross-validate kernel ridge regression over the lambda and period grids.
    Cv(Paths),
    /// Fit the spectrum-recovery rank ladder on a synthetic multi-tone signal.
    Spectrum(Paths),
    /// Compare tensor models and kernel baselines at matched parameter budgets.
    Benchmark(Paths),
}

type Handler = fn(&RunConfig, &std::path::Path) -> qtn_core::Result<()>;

fn exit_code(class: ErrorClass) -> u8 {
    match class {
        ErrorClass::Config => 2,
        ErrorClass::Data => 3,
        ErrorClass::Numerical => 4,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let (paths, run): (&Paths, Handler) = match &cli.command {
        Command::Train(p) => (p, commands::train),
        Command::Predict(p) => (p, commands::predict),
        Command::Eval(p) => (p, commands::eval),
        Command::Cv(p) => (p, commands::cv),
        Command::Spectrum(p) => (p, commands::spectrum),
        Command::Benchmark(p) => (p, commands::benchmark),
    };
    let result = RunConfig::load(&paths.config).and_then(|cfg| {
        std::fs::create_dir_all(&paths.out)?;
        run(&cfg, &paths.out)
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.class()))
        }
    }
}
