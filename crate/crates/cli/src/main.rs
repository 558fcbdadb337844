//! `itemcal`: the calibration pipeline as subcommands over files.
//!
//! Every stage reads its inputs from explicit flags or from artifacts that
//! earlier stages left in `--out`, and writes its own artifacts there. On
//! failure a one-line JSON error record goes to stderr and the exit status is
//! nonzero.

mod commands;
mod error;
mod workspace;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::error::CliError;

const DEFAULT_SEED: u64 = 20_240_521;

#[derive(Debug, Parser)]
#[command(name = "itemcal", version, about = "Item bank calibration workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct Common {
    /// Output directory; created when absent.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Item bank JSON. Defaults to `<out>/bank.json`.
    #[arg(long)]
    pub bank: Option<PathBuf>,
    /// Master seed from which every stage seed is derived.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
}

#[derive(Debug, Args, Clone)]
pub struct Data {
    /// Long-form responses: participant_id,item_id,outcome,rt_ms.
    #[arg(long)]
    pub responses: Option<PathBuf>,
    /// Participant metadata: participant_id,total_time_s,attention_correct,device_ok.
    #[arg(long)]
    pub participants: Option<PathBuf>,
}

#[derive(Debug, Args, Clone)]
pub struct Sampling {
    #[arg(long, default_value_t = 4)]
    pub chains: usize,
    /// Iterations per chain, warmup included.
    #[arg(long, default_value_t = 2000)]
    pub iters: usize,
    #[arg(long, default_value_t = 1000)]
    pub warmup: usize,
    #[arg(long, default_value_t = 1)]
    pub thin: usize,
}

#[derive(Debug, Args, Clone)]
pub struct Flagging {
    /// Comma-separated flags that must all hold for removal.
    #[arg(long)]
    pub rule: Option<String>,
    /// JSON file overriding flag thresholds.
    #[arg(long = "thresholds-file")]
    pub thresholds_file: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate the bank and write its blueprint coverage matrix.
    Validate {
        #[command(flatten)]
        common: Common,
    },
    /// Content validity ratios and the CVR screen.
    Cvr {
        #[command(flatten)]
        common: Common,
        /// Expert ratings: expert_id,item_id,rating.
        #[arg(long)]
        ratings: PathBuf,
        /// Items with CVR strictly below this are removed.
        #[arg(long, default_value_t = 0.0)]
        threshold: f64,
    },
    /// Check and normalize a response log against the bank.
    Ingest {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: Data,
    },
    /// Apply participant exclusion rules.
    Exclude {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: Data,
    },
    /// Correction-for-guessing scores.
    Score {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: Data,
    },
    /// Classical item statistics and classes.
    Ctt {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: Data,
    },
    /// Bayesian 2PL calibration.
    Fit {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: Data,
        #[command(flatten)]
        sampling: Sampling,
    },
    /// Convergence diagnostics from stored posterior draws.
    Diagnose {
        #[command(flatten)]
        common: Common,
    },
    /// Item characteristic, information, and SEM curves.
    Curves {
        #[command(flatten)]
        common: Common,
    },
    /// Cronbach's alpha and omega total.
    Reliability {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: Data,
    },
    /// Converging-evidence item removal.
    Select {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        flagging: Flagging,
    },
    /// Generate a synthetic bank and response log with known parameters.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long = "n-items", default_value_t = 49)]
        n_items: usize,
        #[arg(long = "n-participants", default_value_t = 485)]
        n_participants: usize,
        /// Missing-completely-at-random skip probability.
        #[arg(long = "skip-rate", default_value_t = 0.05)]
        skip_rate: f64,
        /// Engineer an exclusion cohort: device failures, clickers, short-and-skippy.
        #[arg(long, value_name = "D,C,S")]
        engineer: Option<String>,
    },
    /// Per-item summary table: task, CVR, P, r, e, a, classes, flags.
    Report {
        #[command(flatten)]
        common: Common,
        /// Expert ratings; defaults to the `cvr` stage output.
        #[arg(long)]
        ratings: Option<PathBuf>,
        #[command(flatten)]
        flagging: Flagging,
    },
}

fn run(cli: Cli) -> error::CliResult<()> {
    use commands as c;
    match cli.command {
        Command::Validate { common } => c::validate(&common),
        Command::Cvr {
            common,
            ratings,
            threshold,
        } => c::cvr(&common, &ratings, threshold),
        Command::Ingest { common, data } => c::ingest(&common, &data),
        Command::Exclude { common, data } => c::exclude(&common, &data),
        Command::Score { common, data } => c::score(&common, &data),
        Command::Ctt { common, data } => c::ctt(&common, &data),
        Command::Fit { common, data, sampling } => c::fit(&common, &data, &sampling),
        Command::Diagnose { common } => c::diagnose(&common),
        Command::Curves { common } => c::curves(&common),
        Command::Reliability { common, data } => c::reliability(&common, &data),
        Command::Select { common, flagging } => c::select(&common, &flagging),
        Command::Simulate {
            common,
            n_items,
            n_participants,
            skip_rate,
            engineer,
        } => c::simulate(&common, n_items, n_participants, skip_rate, engineer.as_deref()),
        Command::Report {
            common,
            ratings,
            flagging,
        } => c::report(&common, ratings.as_deref(), &flagging),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = CliError::Usage(e.render().to_string().trim().to_string());
            eprintln!("{}", err.record());
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.record());
            ExitCode::FAILURE
        }
    }
}
