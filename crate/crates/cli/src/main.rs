//! `clda`: command-line front end for compound LDA.

mod analyze;
mod compare;
mod error;
mod estimate;
mod model_dir;
mod output;
mod prep;
mod train;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::error::CliResult;

#[derive(Parser, Debug)]
#[command(name = "clda", version, about = "Compound LDA topic models for multi-collection corpora")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Tokenize a directory of text files into a corpus.
    Preprocess(prep::PreprocessArgs),
    /// Draw a synthetic corpus and its latent variables.
    Generate(prep::GenerateArgs),
    /// Hold out documents and words for perplexity.
    Split(prep::SplitArgs),
    /// Fit a model.
    Train(Box<train::TrainArgs>),
    /// Estimate hyperparameters with Gibbs-EM.
    EstimateHyper(estimate::EstimateArgs),
    /// Score a trained model.
    Evaluate(analyze::EvaluateArgs),
    /// Write estimates of a trained model as CSV.
    Export(analyze::ExportArgs),
    /// Collection mixtures from cLDA or LDA.
    Compare(compare::CompareArgs),
}

fn dispatch(command: &Command) -> CliResult<String> {
    match command {
        Command::Preprocess(a) => prep::run_preprocess(a),
        Command::Generate(a) => prep::run_generate(a),
        Command::Split(a) => prep::run_split(a),
        Command::Train(a) => train::run(a),
        Command::EstimateHyper(a) => estimate::run(a),
        Command::Evaluate(a) => analyze::run_evaluate(a),
        Command::Export(a) => analyze::run_export(a),
        Command::Compare(a) => compare::run(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli.command) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("clda: {e}");
            e.exit_code()
        }
    }
}
