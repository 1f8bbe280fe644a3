use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use icqr::bench::{
    emit_report, emit_width_quantiles, load_config, parse_methods, run_experiment,
    synthetic_by_name, ExperimentConfig, ReportFormat,
};

/// Benchmark harness for conformal prediction intervals.
#[derive(Parser)]
#[command(name = "icqr", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and report interval widths and coverages.
    Run(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config file (flat `key = value` lines).
    #[arg(long)]
    config: Option<PathBuf>,

    /// Report format: table, json or csv.
    #[arg(long, default_value = "table")]
    format: String,

    /// Write the report to this file instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,

    /// Comma-separated subset of naive,qr,cqr,icqr; overrides the config.
    #[arg(long)]
    methods: Option<String>,

    /// Number of trials; overrides the config.
    #[arg(long)]
    trials: Option<usize>,

    /// Base seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,

    /// Built-in generator (linear, two-group, four-group) instead of a
    /// dataset; overrides any dataset in the config.
    #[arg(long)]
    synthetic: Option<String>,

    /// Also write plot-ready width-quantile CSV to this file.
    #[arg(long)]
    width_quantiles: Option<PathBuf>,
}

fn run(args: &RunArgs) -> icqr::Result<()> {
    let mut cfg = match &args.config {
        Some(path) => load_config(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(name) = &args.synthetic {
        cfg.synthetic = Some(synthetic_by_name(name)?);
        cfg.dataset = None;
    }
    if let Some(methods) = &args.methods {
        cfg.methods = parse_methods(methods)?;
    }
    if let Some(trials) = args.trials {
        cfg.trials = trials;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let format: ReportFormat = args.format.parse()?;

    let report = run_experiment(&cfg)?;

    match &args.output {
        Some(path) => {
            let mut file = std::fs::File::create(path)?;
            emit_report(&report, format, &mut file)?;
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            emit_report(&report, format, &mut stdout)?;
        }
    }
    if let Some(path) = &args.width_quantiles {
        let mut file = std::fs::File::create(path)?;
        emit_width_quantiles(&report, &mut file)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let Cli {
        command: Command::Run(args),
    } = Cli::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
