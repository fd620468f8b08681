//! `crisis-lens`: one subcommand per pipeline stage, exchanging artifacts through an
//! output directory.

mod artifacts;
mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::artifacts::Workspace;
use crate::config::Loaded;

/// An error caused by the user's input or invocation rather than by the pipeline itself.
#[derive(Debug)]
pub struct ValidationError(pub String);

impl std::fmt::Display for ValidationError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ValidationError {}

pub fn invalid(msg: impl Into<String>) -> anyhow::Error {
    ValidationError(msg.into()).into()
}

#[derive(Debug, Parser)]
#[command(name = "crisis-lens", version, about = "Crisis headline sentiment pipeline")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true, env = "CRISIS_LENS_CONFIG")]
    config: Option<PathBuf>,

    /// Output directory for artifacts (overrides `paths.out`; default `out`).
    #[arg(long, global = true, env = "CRISIS_LENS_OUT")]
    out: Option<PathBuf>,

    /// Seed for every stochastic step (overrides `seed` in the config; default 42).
    #[arg(long, global = true, env = "CRISIS_LENS_SEED")]
    seed: Option<u64>,

    /// Log progress to stderr; repeat for more detail.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Read the raw corpus (CSV or JSONL) into corpus.jsonl.
    Ingest,
    /// Keep records whose relevance score exceeds the threshold.
    Filter,
    /// Resolve annotator votes into a single label per record.
    ResolveLabels,
    /// Pairwise Cohen's kappa between annotators.
    Agreement,
    /// Punctuation removal, tokenization, stopword removal and stemming.
    Preprocess,
    /// Stratified train/validation/test split.
    Split,
    /// Rebalance the training split with paraphrases.
    Augment,
    /// Fit TF-IDF features and a classifier (svm, logreg, forest, knn or all).
    Train(ModelArg),
    /// Score trained classifiers on the test split.
    Evaluate(ModelArg),
    /// Topic modeling.
    #[command(subcommand)]
    Lda(LdaCommand),
    /// Daily or weekly label shares and per-period event statistics.
    Timeline,
    /// Markdown summary of every artifact produced so far.
    Report,
    /// Every stage in order.
    Run,
}

#[derive(Debug, Args)]
struct ModelArg {
    #[arg(default_value = "all")]
    model: String,
}

#[derive(Debug, Subcommand)]
enum LdaCommand {
    /// Fit a topic model with the configured K.
    Fit,
    /// Top words per topic with per-topic coherence.
    Topics,
    /// C_v and UMass coherence of the fitted model.
    Coherence,
    /// Fit one model per candidate K and keep the most coherent.
    SelectK {
        /// Comma-separated candidates (default: `lda.k_grid`).
        #[arg(long, value_delimiter = ',')]
        ks: Option<Vec<usize>>,
    },
    /// One topic model per sentiment class.
    BySentiment,
}

fn dispatch(ws: &Workspace, command: Command) -> anyhow::Result<()> {
    use commands::*;
    match command {
        Command::Ingest => data::ingest(ws),
        Command::Filter => data::filter(ws),
        Command::ResolveLabels => data::resolve_labels(ws),
        Command::Agreement => data::agreement(ws),
        Command::Preprocess => data::preprocess(ws),
        Command::Split => data::split(ws),
        Command::Augment => data::augment(ws),
        Command::Train(m) => model::train(ws, &m.model),
        Command::Evaluate(m) => model::evaluate(ws, &m.model),
        Command::Lda(LdaCommand::Fit) => lda::fit(ws),
        Command::Lda(LdaCommand::Topics) => lda::topics(ws),
        Command::Lda(LdaCommand::Coherence) => lda::coherence(ws),
        Command::Lda(LdaCommand::SelectK { ks }) => lda::select_k(ws, ks),
        Command::Lda(LdaCommand::BySentiment) => lda::by_sentiment(ws),
        Command::Timeline => report::timeline(ws),
        Command::Report => report::report(ws),
        Command::Run => run_all(ws),
    }
}

fn run_all(ws: &Workspace) -> anyhow::Result<()> {
    use commands::*;
    data::ingest(ws)?;
    data::filter(ws)?;
    data::resolve_labels(ws)?;
    data::agreement(ws)?;
    data::preprocess(ws)?;
    data::split(ws)?;
    if ws.config().augment.is_some() {
        data::augment(ws)?;
    }
    model::train(ws, "all")?;
    model::evaluate(ws, "all")?;
    lda::fit(ws)?;
    lda::topics(ws)?;
    lda::coherence(ws)?;
    lda::select_k(ws, None)?;
    lda::by_sentiment(ws)?;
    report::timeline(ws)?;
    report::report(ws)
}

fn execute(cli: Cli) -> anyhow::Result<()> {
    let loaded = Loaded::load(cli.config.as_deref(), cli.seed)?;
    let ws = Workspace::new(loaded, cli.out)?;
    dispatch(&ws, cli.command)?;
    ws.write_manifest()
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
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<ValidationError>().is_some() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
