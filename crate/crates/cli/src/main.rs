use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use bocpd_cli::{detect, estimate, evaluate, simulate, sweep, CliError};

/// Streaming multivariate changepoint detection with outlier removal.
#[derive(Parser)]
#[command(name = "bocpd", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate benchmark scenario replications as CSVs plus a truth table.
    Simulate {
        /// Scenario number (1..=9).
        #[arg(long)]
        case: u8,
        /// Number of replications.
        #[arg(long, default_value_t = 1)]
        reps: usize,
        /// Base seed; replication i uses seed + i.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Stream a CSV through the detector and emit the event file.
    Detect {
        /// Run configuration (TOML). Required unless resuming.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Input observations CSV.
        #[arg(long)]
        input: PathBuf,
        /// Event file to write.
        #[arg(long)]
        events: PathBuf,
        /// Optional run-length posterior matrix CSV.
        #[arg(long)]
        posterior_out: Option<PathBuf>,
        /// Optional state snapshot to write after the run.
        #[arg(long)]
        snapshot: Option<PathBuf>,
        /// Resume from a snapshot instead of starting fresh.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Config overrides, e.g. --set detector.cp_window_len=3
        #[arg(long = "set")]
        set: Vec<String>,
    },
    /// Fit stable historical segments and write a hyperparameter file.
    EstimatePriors {
        /// Run configuration (TOML); provides the column mapping and the
        /// covariate recipe. A [hyperparameters] section is not needed.
        #[arg(long)]
        config: PathBuf,
        /// Segment CSVs (repeat; at least two).
        #[arg(long = "input")]
        inputs: Vec<PathBuf>,
        /// Hyperparameter TOML to write.
        #[arg(long)]
        output: PathBuf,
        #[arg(long = "set")]
        set: Vec<String>,
    },
    /// Score declared-changepoint files against a truth table.
    Evaluate {
        /// Declared event CSVs (repeat for multiple series).
        #[arg(long = "declared")]
        declared: Vec<PathBuf>,
        /// Truth CSV with `series,true_changepoint` columns.
        #[arg(long)]
        truth: PathBuf,
        /// Match tolerance in observations/days.
        #[arg(long, default_value_t = 5)]
        tol: usize,
        /// Optional report CSV.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run the simulation pipeline over a cross product of config overrides.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        case: u8,
        #[arg(long, default_value_t = 20)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 5)]
        tol: usize,
        /// Overrides; comma-separated values fan out, e.g.
        /// --set detector.cp_window_len=1,3,5
        #[arg(long = "set")]
        set: Vec<String>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Continue a snapshotted run over the remaining observations.
    Replay {
        /// Snapshot written by a previous detect run.
        #[arg(long)]
        resume: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        events: PathBuf,
        #[arg(long)]
        posterior_out: Option<PathBuf>,
        /// Optional snapshot to write after this segment.
        #[arg(long)]
        snapshot: Option<PathBuf>,
    },
}

fn dispatch(cli: Cli) -> bocpd_cli::Result<()> {
    match cli.command {
        Command::Simulate {
            case,
            reps,
            seed,
            out,
        } => simulate::run(&simulate::SimulateArgs {
            case,
            reps,
            seed,
            out,
        }),
        Command::Detect {
            config,
            input,
            events,
            posterior_out,
            snapshot,
            resume,
            set,
        } => detect::run(&detect::DetectArgs {
            config,
            input,
            events,
            posterior_out,
            snapshot_out: snapshot,
            resume,
            overrides: set,
        }),
        Command::EstimatePriors {
            config,
            inputs,
            output,
            set,
        } => estimate::run(&estimate::EstimateArgs {
            config,
            inputs,
            output,
            overrides: set,
        }),
        Command::Evaluate {
            declared,
            truth,
            tol,
            report,
        } => evaluate::run(&evaluate::EvaluateArgs {
            declared,
            truth,
            tol,
            report,
        }),
        Command::Sweep {
            config,
            case,
            reps,
            seed,
            tol,
            set,
            report,
        } => sweep::run(&sweep::SweepArgs {
            config,
            case,
            reps,
            seed,
            tol,
            sets: set,
            report,
        }),
        Command::Replay {
            resume,
            input,
            events,
            posterior_out,
            snapshot,
        } => detect::run_replay(&detect::ReplayArgs {
            resume,
            input,
            events,
            posterior_out,
            snapshot_out: snapshot,
        }),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version are not usage errors
            if e.kind() == clap::error::ErrorKind::DisplayHelp
                || e.kind() == clap::error::ErrorKind::DisplayVersion
            {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(CliError::exit_code(&e) as u8)
        }
    }
}
