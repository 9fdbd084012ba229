//! `treerare` command-line driver: index building, pipeline runs, evaluation
//! and cost reports.

mod cmd;
mod config;
mod exit;
mod manifest;
mod parses;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "treerare", version, about = "Syntax-tree-guided retrieval and reasoning for QA")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// BM25 index management.
    Index {
        #[command(subcommand)]
        action: IndexAction,
    },
    /// Run a method over a dataset, appending one trace per question.
    Run(cmd::run::RunArgs),
    /// Score traces against a dataset.
    Eval(cmd::eval::EvalArgs),
    /// Render several metrics reports as one results table.
    Table(cmd::eval::TableArgs),
    /// Price the token usage recorded in traces.
    Cost(cmd::cost::CostArgs),
}

#[derive(Subcommand)]
enum IndexAction {
    /// Build an index directory from a JSONL corpus.
    Build(IndexBuildArgs),
}

#[derive(Args)]
pub struct IndexBuildArgs {
    /// JSONL corpus, one `{doc_id, title, text}` per line.
    #[arg(long)]
    corpus: PathBuf,
    /// Output directory; receives `index.bin` and `meta.json`.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0.9)]
    k1: f64,
    #[arg(long, default_value_t = 0.4)]
    b: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Index {
            action: IndexAction::Build(args),
        } => cmd::index::build(&args),
        Command::Run(args) => cmd::run::run(&args),
        Command::Eval(args) => cmd::eval::eval(&args),
        Command::Table(args) => cmd::eval::table(&args),
        Command::Cost(args) => cmd::cost::cost(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}
