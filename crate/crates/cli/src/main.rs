//! `greencast` binary: generate data, preprocess, train, evaluate, and
//! sweep the extreme-importance factor.
//!
//! Exit codes: 0 success, 1 domain error (e.g. empty band or split),
//! 2 IO or usage error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use greencast_cli::commands;
use greencast_cli::config::{parse_test_months, ModelKind, RunConfig};
use greencast_cli::CliError;

#[derive(Parser)]
#[command(
    name = "greencast",
    about = "Extreme-aware greenhouse temperature forecasting toolkit",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Flat key-value config file; command-line flags override it.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Primary input file for the command.
    #[arg(long, value_name = "PATH")]
    input: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Model family to train or sweep.
    #[arg(long, value_name = "gbdt|mlp")]
    model: Option<ModelKind>,
    /// Extreme-case importance factor in (0, 1).
    #[arg(long, value_name = "FLOAT")]
    a: Option<f64>,
    /// Train with plain squared error instead of the weighted loss.
    #[arg(long)]
    baseline: bool,
    /// Top-level seed; every random stream derives from it.
    #[arg(long, value_name = "INT")]
    seed: Option<u64>,
    /// Test months as YYYY-MM[,YYYY-MM...].
    #[arg(long, value_name = "LIST")]
    test_months: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic sensor CSV plus its anomaly manifest.
    Synth {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Ingest raw CSV, clean, aggregate, window, and split by month.
    Preprocess {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Train a model on a windowed train CSV (--input).
    Train {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Evaluate a model file on a windowed test CSV (--input).
    Eval {
        #[command(flatten)]
        common: CommonArgs,
        /// Trained model file produced by `train`.
        #[arg(long, value_name = "PATH")]
        model_file: PathBuf,
    },
    /// Train baseline plus one model per importance factor and compare.
    #[command(name = "sweep-a")]
    SweepA {
        #[command(flatten)]
        common: CommonArgs,
        /// Windowed test CSV shared by all runs.
        #[arg(long, value_name = "PATH")]
        test: PathBuf,
        /// Importance factors to sweep, e.g. 0.5,0.7,0.9.
        #[arg(long, value_name = "LIST")]
        a_list: Option<String>,
    },
}

fn build_config(common: &CommonArgs) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &common.config {
        cfg.load_file(path)?;
    }
    if let Some(input) = &common.input {
        cfg.input = Some(input.clone());
    }
    if let Some(out) = &common.out {
        cfg.out_dir = out.clone();
    }
    if let Some(model) = common.model {
        cfg.model = model;
    }
    if let Some(a) = common.a {
        cfg.a = a;
    }
    if common.baseline {
        cfg.baseline = true;
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(months) = &common.test_months {
        cfg.test_months = parse_test_months(months).map_err(CliError::Usage)?;
    }
    cfg.sync_seeds();
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Synth { common } => {
            let cfg = build_config(&common)?;
            commands::cmd_synth(&cfg)?;
        }
        Command::Preprocess { common } => {
            let cfg = build_config(&common)?;
            commands::cmd_preprocess(&cfg)?;
        }
        Command::Train { common } => {
            let cfg = build_config(&common)?;
            commands::cmd_train(&cfg)?;
        }
        Command::Eval { common, model_file } => {
            let cfg = build_config(&common)?;
            commands::cmd_eval(&cfg, &model_file)?;
        }
        Command::SweepA {
            common,
            test,
            a_list,
        } => {
            let mut cfg = build_config(&common)?;
            if let Some(list) = a_list {
                cfg.sweep_a = list
                    .split(',')
                    .filter(|p| !p.trim().is_empty())
                    .map(|p| {
                        p.trim()
                            .parse::<f64>()
                            .map_err(|_| CliError::Usage(format!("bad a value {p:?}")))
                    })
                    .collect::<Result<_, _>>()?;
            }
            commands::cmd_sweep_a(&cfg, &test)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{err}");
            ExitCode::from(err.exit_code())
        }
    }
}
