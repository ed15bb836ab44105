//! Command-line entry point.
//!
//! Exit codes: 0 on success, 1 on a runtime failure (including any failed
//! run and unreadable result files), 2 on a configuration or usage error.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::config::RunConfig;
use crate::runner::{run_experiment, RunError, RunOptions};
use crate::{plot, report};

pub const WORKERS_ENV: &str = "ISPFL_WORKERS";

#[derive(Debug, Parser)]
#[command(name = "ispfl", version, about = "Federated-learning simulator with adaptive participant counts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every method and seed of a config.
    Run {
        config: PathBuf,
        /// Added to every configured seed.
        #[arg(long, default_value_t = 0)]
        seed_offset: u64,
        /// Output directory; overrides `output.dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Aggregate run directories into one CSV table.
    Report {
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
        /// Write the table here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw loss, accuracy and client-count charts.
    Plot {
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn workers() -> Result<usize, String> {
    match std::env::var(WORKERS_ENV) {
        Err(std::env::VarError::NotPresent) => Ok(0),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(format!("{WORKERS_ENV} must be a positive integer, got `{v}`")),
        },
        Err(e) => Err(format!("{WORKERS_ENV}: {e}")),
    }
}

pub fn main() -> i32 {
    run(std::env::args_os())
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match cli.command {
        Command::Run {
            config,
            seed_offset,
            out,
        } => {
            let workers = match workers() {
                Ok(w) => w,
                Err(e) => {
                    eprintln!("error: {e}");
                    return 2;
                }
            };
            let cfg = match RunConfig::load(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("config error: {e}");
                    return 2;
                }
            };
            let opts = RunOptions {
                out_dir: out,
                seed_offset,
                workers,
            };
            match run_experiment(&cfg, &opts) {
                Ok(outcome) if outcome.failures.is_empty() => {
                    eprintln!("{} runs written to {}", outcome.cells, outcome.out_dir.display());
                    0
                }
                Ok(outcome) => {
                    eprintln!("error: {} of {} runs failed", outcome.failures.len(), outcome.cells);
                    1
                }
                Err(e @ RunError::Config(_)) => {
                    eprintln!("{e}");
                    2
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    1
                }
            }
        }
        Command::Report { dirs, out } => {
            let result = match &out {
                Some(path) => std::fs::File::create(path)
                    .map_err(|e| anyhow::anyhow!("creating {}: {e}", path.display()))
                    .and_then(|f| report::report(&dirs, std::io::BufWriter::new(f))),
                None => report::report(&dirs, std::io::stdout().lock()),
            };
            match result {
                Ok(_) => 0,
                Err(e) => {
                    eprintln!("error: {e:#}");
                    1
                }
            }
        }
        Command::Plot { dirs, out } => match plot::plot_runs(&dirs, &out) {
            Ok(files) => {
                for f in files {
                    eprintln!("wrote {}", f.display());
                }
                0
            }
            Err(e) => {
                eprintln!("error: {e:#}");
                1
            }
        },
    }
}
