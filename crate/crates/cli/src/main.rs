//! `cosymlab <command> --config <path> [--out <dir>] [--seed <u64>]`
//!
//! Exit codes: 0 when every check passes, 1 when any check fails, 2 on
//! usage, config or output errors.

mod commands;
mod config;
mod expr;
mod report;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::CommandError;
use crate::config::RunConfig;

#[derive(Parser)]
#[command(name = "cosymlab", version, about = "Global Poincare sections and cosymplectic structures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Overrides the config's random seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Product construction from a cosymplectic seed, with section checks.
    DemoProduct,
    /// Cosymplectic checks and the field / structure round trip.
    VerifyCosym,
    /// Rational approximation of alpha and its fibration leaf.
    Tischler,
    /// Exactness and Betti obstructions.
    Obstruct,
    /// Return map of a Hamiltonian system on a configured section.
    ReturnMap,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::DemoProduct => "demo-product",
            Command::VerifyCosym => "verify-cosym",
            Command::Tischler => "tischler",
            Command::Obstruct => "obstruct",
            Command::ReturnMap => "return-map",
        }
    }
}

fn run(cli: &Cli) -> Result<bool, CommandError> {
    let Some(path) = &cli.config else {
        return Err(config::ConfigError::Invalid("--config <path> is required".into()).into());
    };
    let mut cfg = RunConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    std::fs::create_dir_all(&cli.out)
        .map_err(|e| CommandError::Output { path: cli.out.display().to_string(), msg: e.to_string() })?;
    let run = match cli.command {
        Command::DemoProduct => commands::demo_product,
        Command::VerifyCosym => commands::verify_cosym,
        Command::Tischler => commands::tischler,
        Command::Obstruct => commands::obstruct,
        Command::ReturnMap => commands::return_map,
    };
    let mut report = run(&cfg, &cli.out)?;
    report.artifacts.insert(0, "report.json".into());
    report.finish();
    let path = cli.out.join("report.json");
    std::fs::write(&path, report.to_json())
        .map_err(|e| CommandError::Output { path: path.display().to_string(), msg: e.to_string() })?;
    for c in &report.checks {
        println!("{} {}", if c.pass { "PASS" } else { "FAIL" }, c.name);
    }
    println!("{}: {} ({:.2} s)", cli.command.name(), if report.pass { "all checks passed" } else { "checks failed" }, report.timing.total_seconds);
    Ok(report.pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("cosymlab {}: {e}", cli.command.name());
            eprintln!("usage: cosymlab <command> --config <path> [--out <dir>] [--seed <u64>]");
            ExitCode::from(2)
        }
    }
}
