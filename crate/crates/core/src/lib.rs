//! Document distances built on optimal transport over word embeddings and
//! topic models, with the evaluation tools to compare them.

pub mod baselines;
pub mod container;
pub mod corpus;
pub mod distances;
pub mod embeddings;
pub mod error;
pub mod eval;
pub mod synthetic;
pub mod topics;
pub mod transport;

pub use baselines::{build_vectors, vector_distance, VectorKind, VectorMethod, VectorModel, VectorRepresentation};
pub use container::Container;
pub use corpus::{Corpus, DocumentDistribution, RawDocument, SplitMode, Vocabulary};
pub use distances::{
    hott, pairwise_matrix, rwmd, topic_cost_matrix, wmd, wmd_truncated, DistanceMatrix, Metric, PreparedMetric,
    TopicCostMatrix,
};
pub use embeddings::{EmbeddingTable, GroundPower};
pub use error::{Error, Result};
pub use eval::{BoundChecker, BoundReport, KnnReport, MantelResult, ThroughputReport};
pub use topics::{fit_lda, LdaConfig, TopicModel};
pub use transport::{solve_exact, wasserstein, Histogram, TransportResult};
