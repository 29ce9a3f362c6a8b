mod commands;
mod config;
mod report;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use bandit_core::{Error, Result};
use clap::{Parser, Subcommand};

use crate::config::{ExperimentConfig, OutputFormat};

#[derive(Parser, Debug)]
#[command(name = "bandit", version, about = "Large-horizon values of risk-sensitive bandit problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides every seed in the file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    output: Option<OutputFormat>,
    /// Write to this file instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for path simulation (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Solve the HJB equation and report the value at the origin.
    Value,
    /// Monte Carlo estimates of the finite-horizon utility of a strategy.
    Simulate,
    /// Exact finite-horizon value by backward induction.
    Dp,
    /// Two-arm risk/reward thresholds.
    Thresholds,
    /// Extreme arms of the mean-variance hull.
    Hull,
    /// Oscillating Brownian motion law and simulation.
    Obm,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Value => "value",
            Command::Simulate => "simulate",
            Command::Dp => "dp",
            Command::Thresholds => "thresholds",
            Command::Hull => "hull",
            Command::Obm => "obm",
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidInput(_) | Error::Policy(_) => 2,
        Error::Numerical(_) => 3,
        Error::Resource(_) => 4,
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.override_seed(s);
    }
    if let Some(f) = cli.output {
        cfg.output.format = f;
    }
    if let Some(p) = &cli.out {
        cfg.output.path = Some(p.display().to_string());
    }
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("cannot start {n} threads: {e}")))?;
    }

    let report = match cli.command {
        Command::Value => commands::value(&mut cfg)?,
        Command::Simulate => commands::simulate(&mut cfg)?,
        Command::Dp => commands::dp(&mut cfg)?,
        Command::Thresholds => commands::thresholds(&mut cfg)?,
        Command::Hull => commands::hull(&mut cfg)?,
        Command::Obm => commands::obm(&mut cfg)?,
    };

    let io_err = |e: io::Error| Error::Config(format!("cannot write output: {e}"));
    let mut out: Box<dyn Write> = match &cfg.output.path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(io_err)?)),
        None => Box::new(io::stdout().lock()),
    };
    // a closed reader (`| head`) is not a failure of the run
    let quiet = |r: io::Result<()>| match r {
        Err(e) if e.kind() == io::ErrorKind::BrokenPipe => Ok(()),
        other => other.map_err(io_err),
    };
    quiet(report::render(cli.command.name(), &cfg, &report, &mut out))?;
    quiet(out.flush())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
