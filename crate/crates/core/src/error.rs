use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty vocabulary")]
    EmptyVocabulary,

    #[error("document empty after filtering")]
    EmptyDocument,

    #[error("invalid corpus record at line {line}: {reason}")]
    CorpusFormat { line: usize, reason: String },

    #[error("invalid split: {0}")]
    InvalidSplit(String),

    #[error("embedding dimension mismatch at line {line}: expected {expected}, found {found}")]
    DimensionMismatch {
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("malformed embedding at line {line}: {reason}")]
    EmbeddingFormat { line: usize, reason: String },

    #[error("no vocabulary word has an embedding")]
    ZeroCoverage,

    #[error("no embedding for word {word:?} (id {id})")]
    MissingEmbedding { id: usize, word: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid histogram: {0}")]
    InvalidHistogram(String),

    #[error("infeasible transport problem: marginal totals {left} and {right} differ by more than 1e-6")]
    Unbalanced { left: f64, right: f64 },

    #[error("network simplex did not converge within {0} pivots")]
    IterationLimit(usize),

    #[error("oracle scale exceeded")]
    OracleScale,

    #[error("empty site set")]
    EmptySet,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("topic {0} has no embedded words in its truncated support")]
    TopicUnembedded(usize),

    #[error("distance between documents {a} and {b} failed: {source}")]
    Pair {
        a: String,
        b: String,
        #[source]
        source: Box<Error>,
    },

    #[error("document {id}: {source}")]
    Document {
        id: String,
        #[source]
        source: Box<Error>,
    },

    #[error("missing {0}")]
    Missing(String),

    #[error("zero variance in distance matrix upper triangle")]
    ZeroVariance,

    #[error("KL divergence undefined: mixture has zero mass on word {0}")]
    KlUndefined(usize),

    #[error("invalid container: {0}")]
    Container(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
