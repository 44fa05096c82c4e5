use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use greenlab_core::experiment::{self, catalog, exit_code, ExperimentConfig};

/// Random-walk experiments on hyperbolic groups.
#[derive(Parser)]
#[command(name = "greenlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config and write its reports.
    Run {
        config: PathBuf,
        /// Output directory, overriding the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seed, overriding the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// List experiment kinds, their parameters and what they check.
    List,
    /// Parse and validate a config without running it.
    Validate { config: PathBuf },
}

const INVARIANT_FAILED: u8 = 3;

fn configure_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("GREENLAB_THREADS") else { return Ok(()) };
    let n: usize = v.trim().parse().map_err(|_| format!("GREENLAB_THREADS must be a positive integer, got {v:?}"))?;
    if n == 0 {
        return Err("GREENLAB_THREADS must be positive".into());
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn load(path: &PathBuf) -> Result<ExperimentConfig, greenlab_core::Error> {
    let config = ExperimentConfig::load(path)?;
    config.validate()?;
    Ok(config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    match cli.command {
        Command::List => {
            print!("{}", catalog());
            ExitCode::SUCCESS
        }
        Command::Validate { config } => match load(&config) {
            Ok(c) => {
                println!("valid: {} ({})", c.name, c.experiment);
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("invalid config: {e}");
                ExitCode::from(exit_code(&e) as u8)
            }
        },
        Command::Run { config, out, seed } => {
            let mut c = match load(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("invalid config: {e}");
                    return ExitCode::from(exit_code(&e) as u8);
                }
            };
            if let Some(s) = seed {
                c.seed = s;
            }
            match experiment::run(&c, out.as_deref()) {
                Ok(outcome) => {
                    for check in &outcome.summary.checks {
                        let tag = if check.passed { "PASS" } else { "FAIL" };
                        println!("{tag} {}: {}", check.name, check.detail);
                    }
                    for (k, v) in &outcome.summary.flags {
                        println!("{k}: {v}");
                    }
                    println!("reports written to {}", outcome.output_dir.display());
                    if outcome.passed() {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(INVARIANT_FAILED)
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(exit_code(&e) as u8)
                }
            }
        }
    }
}
