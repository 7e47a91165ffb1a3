mod args;
mod evaluate;
mod link;
mod manifest;
mod simulate;
mod train;
mod verify;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use args::{EvaluateArgs, LinkArgs, ScoresArgs, SimulateArgs, TrainCmdArgs, VerifyArgs};

#[derive(Parser, Debug)]
#[command(name = "mlipm", version, about = "Multi-relation ideal point estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit sender ideologies and relation weights on an edge-list graph.
    Train(TrainCmdArgs),
    /// Ranking, classification and cold-start metrics for a checkpoint or score file.
    Evaluate(EvaluateArgs),
    /// Hold out sampled links, train on the rest and report link-prediction AUC.
    LinkPredict(LinkArgs),
    /// Generate a synthetic network with known ideologies.
    Simulate(SimulateArgs),
    /// Compare Monte-Carlo Gumbel choices against the logistic link probability.
    VerifyChoice(VerifyArgs),
    /// Export sender positions from a checkpoint, or averaged-label scores from a graph.
    Scores(ScoresArgs),
}

/// Failure classes mapped to process exit codes.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(anyhow::Error),
    Verification(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Verification(_) => 3,
        }
    }
}

impl<E: Into<anyhow::Error>> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError::Data(e.into())
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn run(cli: Cli) -> CliResult<()> {
    let argv: Vec<String> = std::env::args().collect();
    match cli.command {
        Command::Train(a) => train::run(a, &argv),
        Command::Evaluate(a) => evaluate::run(a, &argv),
        Command::LinkPredict(a) => link::run(a, &argv),
        Command::Simulate(a) => simulate::run(a, &argv),
        Command::VerifyChoice(a) => verify::run(a, &argv),
        Command::Scores(a) => evaluate::run_scores(a, &argv),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                CliError::Usage(m) => eprintln!("error: {m}"),
                CliError::Data(err) => eprintln!("error: {err:#}"),
                CliError::Verification(m) => eprintln!("verification failed: {m}"),
            }
            ExitCode::from(e.code())
        }
    }
}
