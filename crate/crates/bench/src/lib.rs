//! Fixtures shared by the criterion benchmarks.

use hott_core::corpus::DocumentDistribution;
use hott_core::distances::{topic_cost_matrix, TopicCostMatrix};
use hott_core::embeddings::distance_matrix;
use hott_core::synthetic::long_document_corpus;
use hott_core::{fit_lda, Corpus, EmbeddingTable, GroundPower, LdaConfig, TopicModel};
use ndarray::Array2;

/// Uniform marginals of size `n` and the Euclidean cost between two
/// disjoint random point sets of that size.
pub fn transport_instance(n: usize, seed: u64) -> (Vec<f64>, Vec<f64>, Array2<f64>) {
    let (_, table) = long_document_corpus(1, 2 * n, 1, 10, seed).expect("fixture");
    let left: Vec<usize> = (0..n).collect();
    let right: Vec<usize> = (n..2 * n).collect();
    let cost = distance_matrix(&left, &right, &table).expect("embedded");
    (vec![1.0 / n as f64; n], vec![1.0 / n as f64; n], cost)
}

/// Long documents with `unique_words` distinct words each, plus a topic
/// model and truncated topic costs fitted on them.
pub struct LongDocuments {
    pub corpus: Corpus,
    pub table: EmbeddingTable,
    pub model: TopicModel,
    pub costs: TopicCostMatrix,
}

impl LongDocuments {
    pub fn new(docs: usize, unique_words: usize, topics: usize) -> Self {
        let (corpus, table) = long_document_corpus(docs, 4 * unique_words, unique_words, 20, 7).expect("fixture");
        let model = fit_lda(&corpus, &LdaConfig { iterations: 50, seed: 7, ..LdaConfig::new(topics) }).expect("lda");
        let costs = topic_cost_matrix(&model, &table, 20, GroundPower::One).expect("costs");
        LongDocuments { corpus, table, model, costs }
    }

    pub fn pair(&self) -> (&DocumentDistribution, &DocumentDistribution) {
        (&self.corpus.documents[0], &self.corpus.documents[1])
    }

    pub fn proportions(&self, doc: usize) -> Vec<f64> {
        self.model.doc_topic.row(doc).to_vec()
    }
}
