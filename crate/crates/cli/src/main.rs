mod artifacts;
mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Document distances via hierarchical optimal topic transport, with WMD,
/// RWMD and vector-space comparators.
#[derive(Parser, Debug)]
#[command(name = "hott", version)]
struct Cli {
    /// Worker threads for parallel stages (0 = one per core). Results do not
    /// depend on this value.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Tokenize a `label<TAB>text` corpus, build the vocabulary and persist it
    Ingest(IngestArgs),
    /// Fit an LDA topic model by collapsed Gibbs sampling
    FitLda(FitLdaArgs),
    /// Precompute WMD between truncated topics
    TopicCosts(TopicCostsArgs),
    /// Pairwise distance matrix over a corpus
    Dist(DistArgs),
    /// k-nearest-neighbor classification error of a metric
    Knn(KnnArgs),
    /// Mantel correlation and Frobenius difference between two matrices
    Mantel(MantelArgs),
    /// Check the lower and upper bound chain on sampled document pairs
    Bounds(BoundsArgs),
    /// Single-worker pairs-per-second measurement
    Bench(BenchArgs),
}

#[derive(Args, Debug)]
struct IngestArgs {
    /// Corpus file, one `label<TAB>text` document per line
    #[arg(long)]
    input: PathBuf,
    /// Persisted corpus (JSON)
    #[arg(long)]
    output: PathBuf,
    /// Keep words appearing in at least this many documents
    #[arg(long, default_value_t = 1)]
    min_doc_freq: usize,
    /// Keep at most this many of the most frequent words
    #[arg(long)]
    max_vocab: Option<usize>,
    /// Keep letter case instead of lowercasing
    #[arg(long)]
    keep_case: bool,
    /// Also write the vocabulary, one word per line
    #[arg(long)]
    vocab_output: Option<PathBuf>,
    /// Fraction of documents for a train split; requires both split outputs
    #[arg(long, requires_all = ["train_output", "test_output"])]
    train_fraction: Option<f64>,
    /// Shuffle before splitting with this seed (in-order split if absent)
    #[arg(long)]
    split_seed: Option<u64>,
    #[arg(long)]
    train_output: Option<PathBuf>,
    #[arg(long)]
    test_output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FitLdaArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = hott_core::topics::DEFAULT_NUM_TOPICS)]
    topics: usize,
    /// Proportion prior (default 50 / topics)
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, default_value_t = hott_core::topics::DEFAULT_BETA)]
    beta: f64,
    #[arg(long, default_value_t = hott_core::topics::DEFAULT_ITERATIONS)]
    iterations: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct TopicCostsArgs {
    #[arg(long)]
    model: PathBuf,
    /// Word vectors (`word v1 v2 ...` lines, optionally gzipped)
    #[arg(long)]
    embeddings: PathBuf,
    /// Corpus whose vocabulary the model was fitted on
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Words kept per topic
    #[arg(long, default_value_t = hott_core::topics::DEFAULT_TOPIC_WORDS)]
    topic_words: usize,
    #[arg(long, default_value_t = 1)]
    ground_power: u32,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum MetricName {
    Wmd,
    WmdT,
    Rwmd,
    Hott,
    Hoftt,
    Nbow,
    Tfidf,
    Lsi,
    Lda,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum VectorDistance {
    Euclidean,
    Cosine,
}

#[derive(Args, Debug)]
struct MetricArgs {
    #[arg(long, value_enum)]
    metric: MetricName,
    /// Word vectors, required by wmd, wmd-t and rwmd
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Topic model, required by hott, hoftt and lda
    #[arg(long)]
    model: Option<PathBuf>,
    /// Topic cost matrix from `topic-costs`, required by hott and hoftt
    #[arg(long)]
    topic_costs: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    ground_power: u32,
    /// Words kept per document for wmd-t
    #[arg(long, default_value_t = 20)]
    doc_words: usize,
    /// LSI dimension (default: topic count of --model, else 70)
    #[arg(long)]
    lsi_dim: Option<usize>,
    #[arg(long, value_enum, default_value_t = VectorDistance::Euclidean)]
    vector_distance: VectorDistance,
    /// Gibbs sweeps when folding in documents the model was not trained on
    #[arg(long, default_value_t = hott_core::topics::DEFAULT_INFER_ITERATIONS)]
    infer_iterations: usize,
    /// Seed for fold-in inference
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct DistArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[command(flatten)]
    metric: MetricArgs,
    /// Distance matrix artifact
    #[arg(long)]
    output: PathBuf,
    /// Also export the matrix as CSV
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct KnnArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[command(flatten)]
    metric: MetricArgs,
    /// Neighborhood sizes: `K`, `A,B,C`, or a range `A..B` optionally
    /// followed by `odd`
    #[arg(long, num_args = 1..=2, default_values = ["1..19", "odd"])]
    k: Vec<String>,
    /// Report as key=value lines
    #[arg(long)]
    output: Option<PathBuf>,
    /// Per-k errors as CSV
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct MantelArgs {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    #[arg(long, default_value_t = 999)]
    permutations: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BoundsArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    embeddings: PathBuf,
    /// Document pairs to sample
    #[arg(long, default_value_t = 200)]
    pairs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = hott_core::topics::DEFAULT_INFER_ITERATIONS)]
    infer_iterations: usize,
    #[arg(long)]
    output: Option<PathBuf>,
    /// Per-pair values and residuals as CSV
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[command(flatten)]
    metric: MetricArgs,
    /// Timed pairs
    #[arg(long, default_value_t = 100)]
    pairs: usize,
    /// Untimed pairs before measuring
    #[arg(long, default_value_t = 5)]
    warmup: usize,
    #[arg(long)]
    output: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.workers).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return ExitCode::FAILURE;
        }
    };
    match pool.install(|| commands::run(cli.command)) {
        Ok(()) => {
            let (plans, worst) = hott_core::transport::marginal_audit();
            if plans > 0 {
                eprintln!("transport_plans={plans} max_marginal_residual={worst:e}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
