//! `mvae`: preprocessing, training, generation, evaluation and inspection.
//!
//! Exit status is 2 for usage errors (bad flags, bad configuration) and 1
//! for failures while running. Diagnostics and the effective-settings
//! header go to standard error; results go to standard output.

mod config;
mod inspect;
mod pipeline;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mvae_model::Task;
use serde::Serialize;

/// A problem with how the program was invoked rather than with the data.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser, Debug)]
#[command(name = "mvae", version, about = "Graph-to-text generation with multi-view autoencoding losses")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build views, path features and vocabularies from a JSON Lines dataset.
    Preprocess(PreprocessArgs),
    /// Train a model on a preprocessed dataset.
    Train(TrainArgs),
    /// Generate one sentence per input graph.
    Generate(GenerateArgs),
    /// Score hypotheses with corpus BLEU and, optionally, relation recall.
    Evaluate(EvaluateArgs),
    /// Print the view constructions for a graph.
    #[command(subcommand)]
    Views(ViewsCommand),
    /// Finite-difference check of every gradient of a small model.
    Gradcheck(GradcheckArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskArg {
    Amr,
    Kg,
}

impl From<TaskArg> for Task {
    fn from(t: TaskArg) -> Self {
        match t {
            TaskArg::Amr => Task::Amr,
            TaskArg::Kg => Task::Kg,
        }
    }
}

#[derive(Args, Debug, Serialize)]
pub struct PreprocessArgs {
    /// JSON Lines records with `id`, `graph` or `triples`, `sentence` and
    /// optional `alignments`.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub task: TaskArg,
    /// Number of distinct relation paths kept besides the reserved ones.
    #[arg(long, default_value_t = 10_000)]
    pub features_cap: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// Drop edge labels from the grounded and linearized views.
    #[arg(long)]
    pub no_edge_labels: bool,
    /// Linearize with random child orders (re-drawn every training epoch).
    #[arg(long)]
    pub random_linearization: bool,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Tokens seen fewer times map to the unknown symbol.
    #[arg(long, default_value_t = 1)]
    pub min_count: usize,
}

#[derive(Args, Debug, Serialize)]
pub struct TrainArgs {
    /// Flat JSON object of model and training settings.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Progress line interval on standard error; 0 disables.
    #[arg(long, default_value_t = 100)]
    pub log_every: usize,
}

#[derive(Args, Debug, Serialize)]
pub struct GenerateArgs {
    /// Checkpoint `model.bin`; its directory must hold the training outputs.
    #[arg(long)]
    pub model: PathBuf,
    /// JSON Lines records; `sentence` may be omitted.
    #[arg(long)]
    pub input: PathBuf,
    /// Beam width; greedy search when absent.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub beam: Option<u32>,
    #[arg(long, default_value_t = 100)]
    pub max_len: usize,
}

#[derive(Args, Debug, Serialize)]
pub struct EvaluateArgs {
    /// One whitespace-tokenized reference per line.
    #[arg(long)]
    pub refs: PathBuf,
    #[arg(long)]
    pub hyps: PathBuf,
    /// AMR records in hypothesis order for the relation-recall proxy.
    #[arg(long)]
    pub relation_recall: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct GraphInput {
    /// PENMAN text (AMR) or `subject | predicate | object` lines (KG);
    /// read from standard input when absent.
    pub graph: Option<String>,
    #[arg(long, value_enum, default_value_t = TaskArg::Amr)]
    pub task: TaskArg,
}

#[derive(Subcommand, Debug)]
pub enum ViewsCommand {
    /// Bracketed linearization of the graph.
    Linearize {
        #[command(flatten)]
        input: GraphInput,
        #[arg(long)]
        no_edge_labels: bool,
        /// Shuffle children with this seed instead of keeping input order.
        #[arg(long)]
        order_seed: Option<u64>,
    },
    /// Grounded arcs of each record, as `head label modifier` lines.
    Ground {
        /// JSON Lines records with sentences and alignments.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = TaskArg::Amr)]
        task: TaskArg,
        #[arg(long)]
        no_edge_labels: bool,
    },
    /// Relation path between every ordered pair of encoder nodes.
    Paths {
        #[command(flatten)]
        input: GraphInput,
    },
}

#[derive(Args, Debug, Serialize)]
pub struct GradcheckArgs {
    /// Model width; heads are 2 when it is even.
    #[arg(long, default_value_t = 8)]
    pub dims: usize,
    #[arg(long, default_value_t = 1e-5)]
    pub eps: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 3)]
    pub seed: u64,
}

/// Prints the resolved settings of a subcommand to standard error.
pub fn echo(command: &str, settings: &impl Serialize) {
    match serde_json::to_string(settings) {
        Ok(s) => eprintln!("mvae {command}: {s}"),
        Err(e) => eprintln!("mvae {command}: <unprintable settings: {e}>"),
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Preprocess(a) => pipeline::preprocess(&a),
        Command::Train(a) => pipeline::train(&a),
        Command::Generate(a) => pipeline::generate(&a),
        Command::Evaluate(a) => inspect::evaluate(&a),
        Command::Views(v) => inspect::views(&v),
        Command::Gradcheck(a) => inspect::gradcheck(&a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
