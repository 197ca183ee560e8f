//! LDA by collapsed Gibbs sampling, fold-in inference for unseen documents,
//! and the two truncation rules applied before topic transport.

use ndarray::{Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::container::Container;
use crate::corpus::{Corpus, DocumentDistribution};
use crate::error::{Error, Result};

pub const DEFAULT_NUM_TOPICS: usize = 70;
pub const DEFAULT_TOPIC_WORDS: usize = 20;
pub const DEFAULT_BETA: f64 = 0.01;
pub const DEFAULT_ITERATIONS: usize = 1000;
pub const DEFAULT_INFER_ITERATIONS: usize = 50;

/// Symmetric proportion prior used when none is given: `50 / |T|`.
pub fn default_alpha(num_topics: usize) -> f64 {
    50.0 / num_topics as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct LdaConfig {
    pub num_topics: usize,
    pub alpha: f64,
    pub beta: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl LdaConfig {
    pub fn new(num_topics: usize) -> Self {
        LdaConfig {
            num_topics,
            alpha: default_alpha(num_topics),
            beta: DEFAULT_BETA,
            iterations: DEFAULT_ITERATIONS,
            seed: 0,
        }
    }
}

impl Default for LdaConfig {
    fn default() -> Self {
        LdaConfig::new(DEFAULT_NUM_TOPICS)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopicModel {
    pub num_topics: usize,
    pub vocab_size: usize,
    /// `|T| x |V|`, each row a distribution over words.
    pub topic_word: Array2<f64>,
    /// `|D| x |T|` proportions of the training documents.
    pub doc_topic: Array2<f64>,
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
    pub iterations: usize,
    /// [`Corpus::fingerprint`] of the training corpus (0 if unknown).
    pub corpus_fingerprint: u64,
}

impl TopicModel {
    /// Assembles a model from explicit matrices, e.g. for constructed
    /// fixtures. Rows must be probability vectors.
    pub fn from_parts(topic_word: Array2<f64>, doc_topic: Array2<f64>, alpha: f64, beta: f64) -> Result<Self> {
        let num_topics = topic_word.nrows();
        if num_topics < 2 {
            return Err(Error::InvalidParameter("a topic model needs at least 2 topics".into()));
        }
        if doc_topic.ncols() != num_topics {
            return Err(Error::Shape(format!(
                "doc_topic has {} columns for {num_topics} topics",
                doc_topic.ncols()
            )));
        }
        for row in topic_word.outer_iter().chain(doc_topic.outer_iter()) {
            check_distribution(row)?;
        }
        Ok(TopicModel {
            num_topics,
            vocab_size: topic_word.ncols(),
            topic_word,
            doc_topic,
            alpha,
            beta,
            seed: 0,
            iterations: 0,
            corpus_fingerprint: 0,
        })
    }

    pub fn topic(&self, k: usize) -> ArrayView1<'_, f64> {
        self.topic_word.row(k)
    }

    pub fn to_container(&self) -> Container {
        let mut c = Container::new("topic_model");
        c.push("num_topics", self.num_topics)
            .push("vocab_size", self.vocab_size)
            .push("num_docs", self.doc_topic.nrows())
            .push("alpha", format!("{:?}", self.alpha))
            .push("beta", format!("{:?}", self.beta))
            .push("seed", self.seed)
            .push("iterations", self.iterations)
            .push("corpus_fingerprint", format!("{:016x}", self.corpus_fingerprint));
        c.push_array("topic_word", self.topic_word.clone());
        c.push_array("doc_topic", self.doc_topic.clone());
        c
    }

    pub fn from_container(mut c: Container) -> Result<Self> {
        c.expect_kind("topic_model")?;
        let num_topics: usize = c.parse("num_topics")?;
        let vocab_size: usize = c.parse("vocab_size")?;
        let fingerprint = u64::from_str_radix(c.require("corpus_fingerprint")?, 16)
            .map_err(|_| Error::Container("bad corpus fingerprint".into()))?;
        let alpha = c.parse("alpha")?;
        let beta = c.parse("beta")?;
        let seed = c.parse("seed")?;
        let iterations = c.parse("iterations")?;
        let topic_word = c.take_array("topic_word")?;
        let doc_topic = c.take_array("doc_topic")?;
        if topic_word.dim() != (num_topics, vocab_size) || doc_topic.ncols() != num_topics {
            return Err(Error::Container("matrix shapes disagree with header".into()));
        }
        Ok(TopicModel {
            num_topics,
            vocab_size,
            topic_word,
            doc_topic,
            alpha,
            beta,
            seed,
            iterations,
            corpus_fingerprint: fingerprint,
        })
    }
}

fn check_distribution(row: ArrayView1<'_, f64>) -> Result<()> {
    if row.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(Error::InvalidParameter("negative or non-finite probability".into()));
    }
    let s = row.sum();
    if (s - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!("row sums to {s}")));
    }
    Ok(())
}

fn expand_tokens(doc: &DocumentDistribution) -> impl Iterator<Item = usize> + '_ {
    doc.support
        .iter()
        .zip(&doc.counts)
        .flat_map(|(&w, &c)| std::iter::repeat_n(w, c as usize))
}

/// Draws an index with probability proportional to `weights[..]`.
#[inline]
fn sample(rng: &mut ChaCha8Rng, weights: &[f64], total: f64) -> usize {
    let mut u = rng.random::<f64>() * total;
    for (k, &w) in weights.iter().enumerate() {
        u -= w;
        if u < 0.0 {
            return k;
        }
    }
    // rounding can leave u marginally nonnegative; fall back to the last
    // topic with positive weight
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

/// Collapsed Gibbs sampling over token-topic assignments. The returned
/// matrices are smoothed point estimates from the counts of the final sweep.
pub fn fit_lda(corpus: &Corpus, cfg: &LdaConfig) -> Result<TopicModel> {
    let k_topics = cfg.num_topics;
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if k_topics < 2 {
        return Err(Error::InvalidParameter("num_topics must be at least 2".into()));
    }
    if cfg.iterations == 0 {
        return Err(Error::InvalidParameter("iterations must be at least 1".into()));
    }
    if !(cfg.alpha > 0.0 && cfg.beta > 0.0) || !cfg.alpha.is_finite() || !cfg.beta.is_finite() {
        return Err(Error::InvalidParameter("priors must be positive".into()));
    }
    let v = corpus.vocabulary.len();
    let n_docs = corpus.len();
    let (alpha, beta) = (cfg.alpha, cfg.beta);
    let v_beta = v as f64 * beta;

    let mut words = Vec::new();
    let mut doc_of = Vec::new();
    for (d, doc) in corpus.documents.iter().enumerate() {
        for w in expand_tokens(doc) {
            words.push(w);
            doc_of.push(d);
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    // word-major layout keeps the per-token reads contiguous
    let mut word_topic = vec![0u32; v * k_topics];
    let mut doc_topic = vec![0u32; n_docs * k_topics];
    let mut topic_total = vec![0u32; k_topics];
    let mut z: Vec<usize> = Vec::with_capacity(words.len());
    for (&w, &d) in words.iter().zip(&doc_of) {
        let k = rng.random_range(0..k_topics);
        z.push(k);
        word_topic[w * k_topics + k] += 1;
        doc_topic[d * k_topics + k] += 1;
        topic_total[k] += 1;
    }

    let mut weights = vec![0.0; k_topics];
    for _ in 0..cfg.iterations {
        for t in 0..words.len() {
            let (w, d, old) = (words[t], doc_of[t], z[t]);
            let wt = &mut word_topic[w * k_topics..(w + 1) * k_topics];
            let dt = &mut doc_topic[d * k_topics..(d + 1) * k_topics];
            wt[old] -= 1;
            dt[old] -= 1;
            topic_total[old] -= 1;
            let mut total = 0.0;
            for k in 0..k_topics {
                let p = (dt[k] as f64 + alpha) * (wt[k] as f64 + beta) / (topic_total[k] as f64 + v_beta);
                weights[k] = p;
                total += p;
            }
            let new = sample(&mut rng, &weights, total);
            z[t] = new;
            wt[new] += 1;
            dt[new] += 1;
            topic_total[new] += 1;
        }
    }

    let topic_word = Array2::from_shape_fn((k_topics, v), |(k, w)| {
        (word_topic[w * k_topics + k] as f64 + beta) / (topic_total[k] as f64 + v_beta)
    });
    let doc_lengths: Vec<f64> = corpus.documents.iter().map(|d| d.total_words as f64).collect();
    let doc_topic = Array2::from_shape_fn((n_docs, k_topics), |(d, k)| {
        (doc_topic[d * k_topics + k] as f64 + alpha) / (doc_lengths[d] + k_topics as f64 * alpha)
    });
    Ok(TopicModel {
        num_topics: k_topics,
        vocab_size: v,
        topic_word,
        doc_topic,
        alpha,
        beta,
        seed: cfg.seed,
        iterations: cfg.iterations,
        corpus_fingerprint: corpus.fingerprint(),
    })
}

/// Fold-in Gibbs sampling with the topics held fixed. Returns smoothed
/// proportions `(n_k + alpha) / (N + |T| alpha)`.
pub fn infer_proportions(
    doc: &DocumentDistribution,
    model: &TopicModel,
    iterations: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if iterations == 0 {
        return Err(Error::InvalidParameter("iterations must be at least 1".into()));
    }
    if doc.total_words == 0 || doc.support.is_empty() {
        return Err(Error::EmptyDocument);
    }
    if let Some(&w) = doc.support.iter().find(|&&w| w >= model.vocab_size) {
        return Err(Error::Shape(format!(
            "word id {w} outside model vocabulary of size {}",
            model.vocab_size
        )));
    }
    let k_topics = model.num_topics;
    let alpha = model.alpha;
    let words: Vec<usize> = expand_tokens(doc).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0u32; k_topics];
    let mut z: Vec<usize> = words
        .iter()
        .map(|_| {
            let k = rng.random_range(0..k_topics);
            counts[k] += 1;
            k
        })
        .collect();
    let mut weights = vec![0.0; k_topics];
    for _ in 0..iterations {
        for (t, &w) in words.iter().enumerate() {
            counts[z[t]] -= 1;
            let mut total = 0.0;
            for k in 0..k_topics {
                let p = (counts[k] as f64 + alpha) * model.topic_word[[k, w]];
                weights[k] = p;
                total += p;
            }
            let new = sample(&mut rng, &weights, total);
            z[t] = new;
            counts[new] += 1;
        }
    }
    let denom = words.len() as f64 + k_topics as f64 * alpha;
    Ok(counts.iter().map(|&c| (c as f64 + alpha) / denom).collect())
}

/// Seed for document `index` derived from a run seed (splitmix64 mixing).
pub fn document_seed(seed: u64, index: usize) -> u64 {
    let mut z = seed.wrapping_add((index as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Topic proportions for every document of `corpus`. Documents of the
/// training corpus (matched by fingerprint) reuse the fitted rows; anything
/// else is folded in, one derived seed per document.
pub fn corpus_proportions(corpus: &Corpus, model: &TopicModel, iterations: usize, seed: u64) -> Result<Array2<f64>> {
    if model.corpus_fingerprint != 0
        && model.corpus_fingerprint == corpus.fingerprint()
        && model.doc_topic.nrows() == corpus.len()
    {
        return Ok(model.doc_topic.clone());
    }
    let rows = corpus
        .documents
        .par_iter()
        .enumerate()
        .map(|(i, doc)| infer_proportions(doc, model, iterations, document_seed(seed, i)))
        .collect::<Result<Vec<_>>>()?;
    let k = model.num_topics;
    Ok(Array2::from_shape_fn((rows.len(), k), |(i, j)| rows[i][j]))
}

/// A topic cut down to its heaviest words.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedTopic {
    pub support: Vec<usize>,
    pub mass: Vec<f64>,
}

/// Keeps the `k` highest-mass words (ties by ascending id) and renormalizes.
/// Output is ordered by descending mass.
pub fn truncate_topic(topic: &[f64], k: usize) -> TruncatedTopic {
    let mut order: Vec<usize> = (0..topic.len()).collect();
    order.sort_by(|&a, &b| topic[b].total_cmp(&topic[a]).then(a.cmp(&b)));
    order.truncate(k.max(1));
    let total: f64 = order.iter().map(|&i| topic[i]).sum();
    let mass = order.iter().map(|&i| topic[i] / total).collect();
    TruncatedTopic { support: order, mass }
}

/// Topic proportions restricted to the major topics of a document.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseProportions {
    pub topics: Vec<usize>,
    pub mass: Vec<f64>,
}

impl SparseProportions {
    /// Number of surviving topics.
    pub fn kappa(&self) -> usize {
        self.topics.len()
    }
}

/// Drops proportions below `1 / (|T| + 1)` and renormalizes the survivors.
pub fn truncate_proportions(dbar: &[f64]) -> SparseProportions {
    let threshold = 1.0 / (dbar.len() as f64 + 1.0);
    let mut topics: Vec<usize> = (0..dbar.len()).filter(|&k| dbar[k] >= threshold).collect();
    if topics.is_empty() {
        // unreachable for a distribution, kept for robustness on raw input
        let arg = (0..dbar.len())
            .max_by(|&a, &b| dbar[a].total_cmp(&dbar[b]).then(b.cmp(&a)))
            .unwrap_or(0);
        topics.push(arg);
    }
    let total: f64 = topics.iter().map(|&k| dbar[k]).sum();
    let mass = topics.iter().map(|&k| dbar[k] / total).collect();
    SparseProportions { topics, mass }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Vocabulary;
    use rand::SeedableRng;

    fn corpus_from(docs: Vec<Vec<(usize, u32)>>, vocab: usize) -> Corpus {
        let v = Vocabulary::new((0..vocab).map(|i| format!("w{i}")).collect()).unwrap();
        let n = docs.len();
        let docs = docs
            .into_iter()
            .map(|d| DocumentDistribution::from_counts(d).unwrap())
            .collect();
        Corpus::new(
            v,
            (0..n).map(|i| format!("d{i}")).collect(),
            docs,
            vec!["x".into(); n],
        )
        .unwrap()
    }

    fn assert_rows_are_distributions(m: &Array2<f64>) {
        for row in m.outer_iter() {
            assert!((row.sum() - 1.0).abs() <= 1e-9);
            assert!(row.iter().all(|&x| x > 0.0));
        }
    }

    #[test]
    fn degenerate_single_document() {
        let c = corpus_from(vec![vec![(0, 3)]], 1);
        let m = fit_lda(&c, &LdaConfig { iterations: 10, ..LdaConfig::new(2) }).unwrap();
        assert_rows_are_distributions(&m.topic_word);
        assert_rows_are_distributions(&m.doc_topic);
        // With a one-word vocabulary every topic is all "a".
        for k in 0..2 {
            assert!((m.topic_word[[k, 0]] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn fit_errors() {
        let c = corpus_from(vec![vec![(0, 3)]], 1);
        assert!(fit_lda(&c, &LdaConfig::new(1)).is_err());
        assert!(fit_lda(&c, &LdaConfig { alpha: 0.0, ..LdaConfig::new(2) }).is_err());
        assert!(fit_lda(&c, &LdaConfig { beta: -1.0, ..LdaConfig::new(2) }).is_err());
        assert!(fit_lda(&c, &LdaConfig { iterations: 0, ..LdaConfig::new(2) }).is_err());
        let empty = c.select(&[]);
        assert!(matches!(fit_lda(&empty, &LdaConfig::new(2)), Err(Error::EmptyCorpus)));
    }

    #[test]
    fn defaults() {
        let cfg = LdaConfig::default();
        assert_eq!(cfg.num_topics, 70);
        assert_eq!(cfg.beta, 0.01);
        assert!((cfg.alpha - 50.0 / 70.0).abs() < 1e-15);
        assert_eq!(cfg.iterations, 1000);
        assert_eq!(DEFAULT_TOPIC_WORDS, 20);
        assert_eq!(DEFAULT_INFER_ITERATIONS, 50);
    }

    fn planted(seed: u64) -> Corpus {
        // two topics, uniform over disjoint halves of a 10-word vocabulary
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let docs = (0..60)
            .map(|_| {
                let theta: f64 = rng.random();
                (0..40)
                    .map(|_| {
                        let half = if rng.random::<f64>() < theta { 0 } else { 5 };
                        (half + rng.random_range(0..5), 1)
                    })
                    .collect()
            })
            .collect();
        corpus_from(docs, 10)
    }

    #[test]
    fn recovers_planted_topics_and_is_deterministic() {
        let c = planted(1);
        let cfg = LdaConfig {
            iterations: 200,
            seed: 4,
            ..LdaConfig::new(2)
        };
        let m = fit_lda(&c, &cfg).unwrap();
        let first_half = |k: usize| m.topic_word.row(k).iter().take(5).sum::<f64>();
        let (a, b) = (first_half(0), first_half(1));
        let matched = (a.min(1.0 - b)).max(b.min(1.0 - a));
        assert!(matched >= 0.9, "{a} {b}");
        assert_eq!(fit_lda(&c, &cfg).unwrap(), m);
    }

    fn separated_model() -> TopicModel {
        let mut tw = Array2::from_elem((2, 4), 0.001);
        tw[[0, 0]] = 0.997;
        tw[[1, 3]] = 0.997;
        TopicModel::from_parts(tw, Array2::from_elem((1, 2), 0.5), 0.5, 0.01).unwrap()
    }

    #[test]
    fn fold_in_picks_dominant_topic() {
        let m = separated_model();
        let doc = DocumentDistribution::from_counts([(0, 10)]).unwrap();
        let p = infer_proportions(&doc, &m, 50, 3).unwrap();
        assert!(p[0] >= 0.8, "{p:?}");
        assert_eq!(infer_proportions(&doc, &m, 50, 3).unwrap(), p);
        assert_eq!(p.len(), 2);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fold_in_errors() {
        let m = separated_model();
        let doc = DocumentDistribution::from_counts([(9, 1)]).unwrap();
        assert!(infer_proportions(&doc, &m, 5, 0).is_err());
        let doc = DocumentDistribution::from_counts([(0, 1)]).unwrap();
        assert!(infer_proportions(&doc, &m, 0, 0).is_err());
    }

    #[test]
    fn corpus_proportions_reuses_fitted_rows() {
        let c = planted(2);
        let m = fit_lda(&c, &LdaConfig { iterations: 20, ..LdaConfig::new(2) }).unwrap();
        assert_eq!(corpus_proportions(&c, &m, 5, 0).unwrap(), m.doc_topic);
        let other = c.select(&[3, 1, 4]);
        let p = corpus_proportions(&other, &m, 5, 0).unwrap();
        assert_eq!(p.dim(), (3, 2));
        assert_rows_are_distributions(&p);
    }

    #[test]
    fn truncate_topic_examples() {
        let t = truncate_topic(&[0.5, 0.3, 0.2], 2);
        assert_eq!(t.support, vec![0, 1]);
        assert!((t.mass[0] - 0.625).abs() < 1e-15 && (t.mass[1] - 0.375).abs() < 1e-15);

        let t = truncate_topic(&[0.2, 0.5, 0.3], 10);
        assert_eq!(t.support, vec![1, 2, 0]);
        assert_eq!(t.mass, vec![0.5, 0.3, 0.2]);

        let t = truncate_topic(&[0.2, 0.5, 0.3], 1);
        assert_eq!(t.support, vec![1]);
        assert_eq!(t.mass, vec![1.0]);

        let t = truncate_topic(&[0.25, 0.25, 0.25, 0.25], 2);
        assert_eq!(t.support, vec![0, 1]);
    }

    #[test]
    fn truncate_proportions_examples() {
        let s = truncate_proportions(&[0.5, 0.3, 0.2]);
        assert_eq!(s.topics, vec![0, 1]);
        assert!((s.mass[0] - 0.625).abs() < 1e-15);
        assert!((s.mass[1] - 0.375).abs() < 1e-15);

        let u = vec![0.2; 5];
        let s = truncate_proportions(&u);
        assert_eq!(s.kappa(), 5);
        assert_eq!(s.mass, u);

        let s = truncate_proportions(&[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(s.topics, vec![0]);
        assert_eq!(s.mass, vec![1.0]);
    }

    #[test]
    fn container_roundtrip_is_bit_exact() {
        let c = planted(3);
        let m = fit_lda(&c, &LdaConfig { iterations: 5, seed: 9, ..LdaConfig::new(3) }).unwrap();
        let bytes = m.to_container().to_bytes();
        let back = TopicModel::from_container(Container::read_from(&bytes[..]).unwrap()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_container().to_bytes(), bytes);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn dist(n: usize) -> impl Strategy<Value = Vec<f64>> {
            proptest::collection::vec(0.0..1.0f64, n).prop_map(|mut w| {
                if w.iter().sum::<f64>() == 0.0 {
                    w[0] = 1.0;
                }
                let s: f64 = w.iter().sum();
                w.iter_mut().for_each(|x| *x /= s);
                w
            })
        }

        proptest! {
            #[test]
            fn truncated_proportions_are_valid(d in (2usize..12).prop_flat_map(dist)) {
                let t = d.len() as f64;
                let s = truncate_proportions(&d);
                prop_assert!(s.kappa() >= 1);
                prop_assert!((s.mass.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
                prop_assert!(s.topics.iter().all(|&k| d[k] >= 1.0 / (t + 1.0)));
                prop_assert!(s.topics.iter().any(|&k| d[k] >= 1.0 / t - 1e-12));
            }

            #[test]
            fn truncated_topics_are_valid(d in (1usize..30).prop_flat_map(dist), k in 1usize..40) {
                let t = truncate_topic(&d, k);
                prop_assert_eq!(t.support.len(), k.min(d.len()));
                prop_assert!((t.mass.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
                prop_assert!(t.mass.windows(2).all(|w| w[0] >= w[1]));
            }
        }
    }
}
