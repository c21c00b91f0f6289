//! `nlqd`: run scenarios, audit criteria, verify trajectory CSVs.
//!
//! Exit codes: 0 success, 1 validation error, 2 numerical error, 3 criterion
//! failure under `--strict` (and any failed `verify`). Every error is also
//! written to stderr as a single JSON record `{"error": tag, "message": ...}`.

mod error;
mod report;
mod scenario;

use std::fs::File;
use std::io::{self, BufReader};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nlqd_core::export;
use nlqd_core::Execution;

use crate::error::CliError;
use crate::scenario::{Kind, Overrides};

const SCHEMA: &str = include_str!("schema.json");

#[derive(Parser)]
#[command(name = "nlqd", version, about = "Nonlinear density-matrix dynamics")]
struct Cli {
    /// Exit with code 3 when a criterion in the report fails.
    #[arg(long, global = true)]
    strict: bool,
    /// Worker threads for mixture branches and audit samples; 1 runs sequentially.
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
    /// Append the full state of every recorded step to the CSV.
    #[arg(long, global = true)]
    dump_states: bool,
    /// Override the step size of the scenario.
    #[arg(long, global = true, value_name = "R")]
    dt: Option<f64>,
    /// Override the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario of any kind.
    Run {
        scenario: PathBuf,
        /// Write the CSV or report here instead of the scenario's `output`.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run a `check` scenario.
    Check {
        scenario: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Check every row of a trajectory CSV against the density-matrix invariants.
    Verify { csv: PathBuf },
    /// Print the JSON schema of scenario files.
    Schema,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(passed) if passed || !cli.strict => ExitCode::SUCCESS,
        Ok(_) => ExitCode::from(3),
        Err(e) => {
            eprintln!("{}", e.record());
            ExitCode::from(e.code)
        }
    }
}

/// Returns whether every criterion in the produced report passed.
fn dispatch(cli: &Cli) -> Result<bool, CliError> {
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(CliError::usage("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::usage(e.to_string()))?;
    }
    let overrides = Overrides {
        dt: cli.dt,
        seed: cli.seed,
        dump_states: cli.dump_states,
        exec: if cli.jobs == Some(1) { Execution::Sequential } else { Execution::Parallel },
    };
    match &cli.command {
        Command::Run { scenario, output } => scenario::run(scenario, output.as_deref(), &overrides, None),
        Command::Check { scenario, output } => scenario::run(scenario, output.as_deref(), &overrides, Some(Kind::Check)),
        Command::Verify { csv } => {
            let file = File::open(csv).map_err(|e| CliError::io(csv, e))?;
            let audit = export::verify_csv(BufReader::new(file))?;
            report::emit_json(None, &report::verify_report(&audit))?;
            // a failed verification is always a failure, strict or not
            if audit.ok() {
                Ok(true)
            } else {
                Err(CliError::criterion(format!("{} of {} rows failed", audit.failures.len(), audit.rows)))
            }
        }
        Command::Schema => {
            print!("{SCHEMA}");
            io::Write::flush(&mut io::stdout()).map_err(|e| CliError::io("stdout", e))?;
            Ok(true)
        }
    }
}
