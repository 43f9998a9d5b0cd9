//! `dlat`: batch valuations on distorted lattices.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use config::{Command, RunConfig};
use run::{Failure, RunFlags};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CommandArg {
    Price,
    Converge,
    Check,
    Couple,
}

impl From<CommandArg> for Command {
    fn from(c: CommandArg) -> Self {
        match c {
            CommandArg::Price => Command::Price,
            CommandArg::Converge => Command::Converge,
            CommandArg::Check => Command::Check,
            CommandArg::Couple => Command::Couple,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "dlat",
    version,
    about = "Distorted expectations on multinomial lattices"
)]
struct Cli {
    #[arg(value_enum)]
    command: CommandArg,
    /// JSON run configuration (optional for `check`).
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV destination; overrides `output.csv_path`. Without either, CSV goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for the coupling simulator; overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Record wall-clock times in `runtime_ms` (otherwise 0, so output is reproducible).
    #[arg(long)]
    timing: bool,
}

fn load(path: &Option<PathBuf>, command: Command) -> Result<RunConfig, Failure> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Failure::Schema(format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| Failure::Schema(format!("{}: {e}", p.display())))
        }
        None if command == Command::Check => Ok(serde_json::from_str("{}").expect("empty config")),
        None => Err(Failure::Schema("--config is required".into())),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command = Command::from(cli.command);
    let result = load(&cli.config, command).and_then(|cfg| {
        let flags = RunFlags {
            seed: cli.seed,
            timing: cli.timing,
        };
        let report = run::run(command, &cfg, &flags)?;
        let target = cli.out.clone().or_else(|| {
            cfg.output
                .as_ref()
                .and_then(|o| o.csv_path.clone())
                .map(PathBuf::from)
        });
        match target {
            Some(path) => {
                std::fs::write(&path, &report.csv).map_err(|e| {
                    Failure::Schema(format!("cannot write {}: {e}", path.display()))
                })?;
                print!("{}", report.console);
            }
            None => print!("{}", report.csv),
        }
        Ok(())
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("dlat: {f}");
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
