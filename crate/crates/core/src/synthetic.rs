//! Seeded synthetic corpora with planted topic structure and clustered word
//! embeddings, for tests, benchmarks and demonstrations.

use ndarray::Array2;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::corpus::{Corpus, DocumentDistribution, Vocabulary};
use crate::embeddings::EmbeddingTable;
use crate::error::Result;

/// Fixed-width lowercase name for word `i`; names sort in id order.
pub fn word_name(i: usize, vocab_size: usize) -> String {
    let mut width = 3;
    while 26usize.pow(width as u32) < vocab_size {
        width += 1;
    }
    let mut out = vec![b'a'; width];
    let mut x = i;
    for slot in out.iter_mut().rev() {
        *slot = b'a' + (x % 26) as u8;
        x /= 26;
    }
    String::from_utf8(out).expect("ascii")
}

pub fn synthetic_vocabulary(size: usize) -> Vocabulary {
    Vocabulary::new((0..size).map(|i| word_name(i, size)).collect()).expect("distinct names")
}

/// Planted-topic corpus parameters. Words are split into `groups` disjoint
/// blocks; topic `g` puts all its mass on block `g`. A document of class `g`
/// takes `dominant` of its proportion mass from topic `g` and the rest from
/// a uniform Dirichlet draw over all topics.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedConfig {
    pub groups: usize,
    pub words_per_group: usize,
    pub docs_per_group: usize,
    pub doc_length: usize,
    pub dominant: f64,
    pub dim: usize,
    /// Distance between neighboring group centers.
    pub separation: f64,
    /// Standard deviation of words around their group center.
    pub spread: f64,
    pub seed: u64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        PlantedConfig {
            groups: 4,
            words_per_group: 25,
            docs_per_group: 25,
            doc_length: 40,
            dominant: 0.7,
            dim: 5,
            separation: 4.0,
            spread: 1.0,
            seed: 0,
        }
    }
}

pub struct PlantedCorpus {
    pub corpus: Corpus,
    pub table: EmbeddingTable,
    /// `groups x |V|` planted topics.
    pub topics: Array2<f64>,
    /// `|D| x groups` planted proportions.
    pub proportions: Array2<f64>,
}

fn dirichlet_uniform(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    // normalized exponentials are a flat Dirichlet draw
    let e: Vec<f64> = (0..k).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|x| x / s).collect()
}

fn pick(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    let mut u = rng.random::<f64>() * weights.iter().sum::<f64>();
    for (i, &w) in weights.iter().enumerate() {
        u -= w;
        if u < 0.0 {
            return i;
        }
    }
    weights.len() - 1
}

/// Embeddings with one Gaussian cluster per word block, centers on a scaled
/// simplex so every pair of centers is `separation` apart.
pub fn clustered_embeddings(
    vocab: &Vocabulary,
    groups: usize,
    words_per_group: usize,
    dim: usize,
    separation: f64,
    spread: f64,
    rng: &mut ChaCha8Rng,
) -> Result<EmbeddingTable> {
    let d = dim.max(groups);
    let noise = Normal::new(0.0, spread.max(0.0)).expect("finite spread");
    let scale = separation / std::f64::consts::SQRT_2;
    let vectors = (0..vocab.len())
        .map(|w| {
            let g = (w / words_per_group.max(1)).min(groups.saturating_sub(1));
            Some(
                (0..d)
                    .map(|j| if j == g { scale } else { 0.0 } + noise.sample(rng))
                    .collect(),
            )
        })
        .collect();
    EmbeddingTable::from_vectors(vocab, vectors)
}

pub fn planted_corpus(cfg: &PlantedConfig) -> Result<PlantedCorpus> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let v = cfg.groups * cfg.words_per_group;
    let vocab = synthetic_vocabulary(v);
    let table = clustered_embeddings(
        &vocab,
        cfg.groups,
        cfg.words_per_group,
        cfg.dim,
        cfg.separation,
        cfg.spread,
        &mut rng,
    )?;

    let mut topics = Array2::zeros((cfg.groups, v));
    for g in 0..cfg.groups {
        let w = dirichlet_uniform(&mut rng, cfg.words_per_group);
        for (j, x) in w.into_iter().enumerate() {
            topics[[g, g * cfg.words_per_group + j]] = x;
        }
    }

    let n = cfg.groups * cfg.docs_per_group;
    let mut proportions = Array2::zeros((n, cfg.groups));
    let mut docs = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let g = i % cfg.groups;
        let rest = dirichlet_uniform(&mut rng, cfg.groups);
        let theta: Vec<f64> = (0..cfg.groups)
            .map(|k| (1.0 - cfg.dominant) * rest[k] + if k == g { cfg.dominant } else { 0.0 })
            .collect();
        let words: Vec<(usize, u32)> = (0..cfg.doc_length)
            .map(|_| {
                let k = pick(&mut rng, &theta);
                (pick(&mut rng, topics.row(k).as_slice().expect("contiguous")), 1)
            })
            .collect();
        for (k, &x) in theta.iter().enumerate() {
            proportions[[i, k]] = x;
        }
        docs.push(DocumentDistribution::from_counts(words)?);
        labels.push(format!("c{g}"));
    }
    let ids = (0..n).map(|i| format!("d{i}")).collect();
    Ok(PlantedCorpus {
        corpus: Corpus::new(vocab, ids, docs, labels)?,
        table,
        topics,
        proportions,
    })
}

/// Long documents: each has exactly `unique_words` distinct words drawn from
/// a vocabulary of `vocab_size`, with counts in `1..=4`. Embeddings are
/// standard normal in `dim` dimensions.
pub fn long_document_corpus(
    docs: usize,
    vocab_size: usize,
    unique_words: usize,
    dim: usize,
    seed: u64,
) -> Result<(Corpus, EmbeddingTable)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocab = synthetic_vocabulary(vocab_size);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let vectors = (0..vocab_size)
        .map(|_| Some((0..dim).map(|_| normal.sample(&mut rng)).collect()))
        .collect();
    let table = EmbeddingTable::from_vectors(&vocab, vectors)?;
    let documents = (0..docs)
        .map(|_| {
            let words = sample(&mut rng, vocab_size, unique_words.min(vocab_size));
            DocumentDistribution::from_counts(words.into_iter().map(|w| (w, rng.random_range(1..=4))).collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let corpus = Corpus::new(
        vocab,
        (0..docs).map(|i| format!("d{i}")).collect(),
        documents,
        (0..docs).map(|i| format!("c{}", i % 2)).collect(),
    )?;
    Ok((corpus, table))
}

/// `label<TAB>text` lines, one per document, with each word repeated by its
/// count.
pub fn corpus_to_tsv(corpus: &Corpus) -> String {
    let mut out = String::new();
    for (doc, label) in corpus.documents.iter().zip(&corpus.labels) {
        out.push_str(label);
        out.push('\t');
        let mut first = true;
        for (&w, &c) in doc.support.iter().zip(&doc.counts) {
            for _ in 0..c {
                if !first {
                    out.push(' ');
                }
                out.push_str(corpus.vocabulary.word(w).expect("in vocabulary"));
                first = false;
            }
        }
        out.push('\n');
    }
    out
}

/// Embeddings as `word v1 v2 ...` lines with round-trip float formatting.
pub fn embeddings_to_text(table: &EmbeddingTable, vocab: &Vocabulary) -> String {
    let mut out = String::new();
    for (id, word) in vocab.words().iter().enumerate() {
        if let Some(v) = table.get(id) {
            out.push_str(word);
            for x in v {
                out.push(' ');
                out.push_str(&x.to_string());
            }
            out.push('\n');
        }
    }
    out
}
