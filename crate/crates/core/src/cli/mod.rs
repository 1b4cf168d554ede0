//! Command-line front end.
//!
//! Exit status is 0 on success, 2 when the requested problem is infeasible
//! and 1 on any error. Diagnostics go to stderr as one `key=value` line.

pub mod commands;
pub mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::error::{Error, Result};
pub use commands::Outcome;
pub use config::{apply_override, parse_config, ExperimentConfig};

#[derive(Debug, Parser)]
#[command(name = "crlink", about = "Joint rate and power adaptation for an underlay cognitive link")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, clap::Args)]
pub struct Common {
    /// Configuration file.
    #[arg(short, long)]
    pub config: PathBuf,
    /// Override a setting, e.g. `--set problem.e1=1.5`. Repeatable.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Output directory; defaults to `[output] dir`.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimize the variable-power policy at the first E1 and P2max.
    Optimize(Common),
    /// Evaluate every scheme over the E1, P2max and separation grids.
    Sweep(Common),
    /// Monte Carlo simulation of the configured scheme.
    Simulate(Common),
    /// Greedy against exhaustive search on random small instances.
    CompareOracle(Common),
    /// Write the region partition with masses, powers and rate sets.
    RegionsExport(Common),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Optimize(_) => "optimize",
            Command::Sweep(_) => "sweep",
            Command::Simulate(_) => "simulate",
            Command::CompareOracle(_) => "compare-oracle",
            Command::RegionsExport(_) => "regions-export",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Optimize(c)
            | Command::Sweep(c)
            | Command::Simulate(c)
            | Command::CompareOracle(c)
            | Command::RegionsExport(c) => c,
        }
    }
}

/// Read the configuration file and apply overrides in order.
pub fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let mut text = std::fs::read_to_string(&common.config)
        .map_err(|e| Error::Io(format!("{}: {e}", common.config.display())))?;
    for o in &common.overrides {
        text = apply_override(&text, o)?;
    }
    parse_config(&text)
}

/// Run a parsed command line.
pub fn execute(cli: &Cli) -> Result<Outcome> {
    let common = cli.command.common();
    let cfg = load_config(common)?;
    let dir = common.output.clone().unwrap_or_else(|| cfg.output_dir.clone());
    match &cli.command {
        Command::Optimize(_) => commands::optimize(&cfg, &dir),
        Command::Sweep(_) => commands::sweep(&cfg, &dir),
        Command::Simulate(_) => commands::simulate(&cfg, &dir),
        Command::CompareOracle(_) => commands::compare_oracle(&cfg, &dir),
        Command::RegionsExport(_) => commands::regions_export(&cfg, &dir),
    }
}

fn quote(s: &str) -> String {
    format!("{:?}", s.replace('\n', " "))
}

/// Run and translate the result into an exit status.
pub fn main_with(cli: Cli) -> ExitCode {
    let name = cli.command.name();
    match execute(&cli) {
        Ok(out) => {
            for f in &out.files {
                println!("wrote {}", f.display());
            }
            match out.infeasible {
                None => ExitCode::SUCCESS,
                Some(reason) => {
                    eprintln!("status=infeasible command={name} reason={}", quote(&reason));
                    ExitCode::from(2)
                }
            }
        }
        Err(e) => {
            let location = match &e {
                Error::Config { key, line, .. } => format!(" key={key} line={line}"),
                _ => String::new(),
            };
            eprintln!(
                "status=error command={name} kind={}{location} message={}",
                e.kind(),
                quote(&e.to_string())
            );
            ExitCode::FAILURE
        }
    }
}
