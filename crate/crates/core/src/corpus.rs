//! Corpus ingestion: tokenization, vocabulary construction, normalized
//! bag-of-words distributions and train/test splits.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::io::BufRead;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Splits text into maximal runs of alphabetic characters.
///
/// Digits, punctuation and whitespace all act as separators.
pub fn tokenize(text: &str, lowercase: bool) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        if ch.is_alphabetic() {
            if lowercase {
                current.extend(ch.to_lowercase());
            } else {
                current.push(ch);
            }
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawDocument {
    pub id: String,
    pub label: String,
    pub tokens: Vec<String>,
}

/// Reads `label<TAB>text` records, one per line. Blank lines are skipped and
/// documents are numbered by record order (`d0`, `d1`, ...).
pub fn read_corpus<R: BufRead>(reader: R, lowercase: bool) -> Result<Vec<RawDocument>> {
    let mut docs = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let (label, text) = line.split_once('\t').ok_or_else(|| Error::CorpusFormat {
            line: lineno + 1,
            reason: "missing tab between label and text".into(),
        })?;
        if label.is_empty() {
            return Err(Error::CorpusFormat {
                line: lineno + 1,
                reason: "empty label".into(),
            });
        }
        docs.push(RawDocument {
            id: format!("d{}", docs.len()),
            label: label.to_string(),
            tokens: tokenize(text, lowercase),
        });
    }
    Ok(docs)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

impl From<Vec<String>> for Vocabulary {
    fn from(words: Vec<String>) -> Self {
        let index = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();
        Vocabulary { words, index }
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.words
    }
}

impl Vocabulary {
    /// Builds a vocabulary from distinct, non-empty words; ids follow the
    /// given order.
    pub fn new(words: Vec<String>) -> Result<Self> {
        if words.is_empty() {
            return Err(Error::EmptyVocabulary);
        }
        let mut seen = HashSet::with_capacity(words.len());
        for w in &words {
            if w.is_empty() {
                return Err(Error::InvalidParameter("empty vocabulary token".into()));
            }
            if !seen.insert(w.as_str()) {
                return Err(Error::InvalidParameter(format!("duplicate token {w:?}")));
            }
        }
        Ok(words.into())
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn id(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn word(&self, id: usize) -> Option<&str> {
        self.words.get(id).map(String::as_str)
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    /// One token per line; line number is the id.
    pub fn export(&self) -> String {
        let mut out = String::new();
        for w in &self.words {
            out.push_str(w);
            out.push('\n');
        }
        out
    }
}

/// Keeps tokens found in at least `min_doc_freq` documents, then the
/// `max_size` most frequent of those (ties broken lexicographically). Ids are
/// assigned in lexicographic order.
pub fn build_vocabulary(
    docs: &[RawDocument],
    min_doc_freq: usize,
    max_size: usize,
) -> Result<Vocabulary> {
    if min_doc_freq == 0 || max_size == 0 {
        return Err(Error::InvalidParameter(
            "min_doc_freq and max_size must be at least 1".into(),
        ));
    }
    let mut doc_freq: HashMap<&str, usize> = HashMap::new();
    let mut total: HashMap<&str, u64> = HashMap::new();
    for doc in docs {
        let mut seen = HashSet::new();
        for tok in &doc.tokens {
            if tok.is_empty() {
                continue;
            }
            *total.entry(tok).or_default() += 1;
            if seen.insert(tok.as_str()) {
                *doc_freq.entry(tok).or_default() += 1;
            }
        }
    }
    let mut kept: Vec<(&str, u64)> = total
        .into_iter()
        .filter(|(w, _)| doc_freq[w] >= min_doc_freq)
        .collect();
    if kept.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    kept.truncate(max_size);
    let mut words: Vec<String> = kept.into_iter().map(|(w, _)| w.to_string()).collect();
    words.sort();
    Ok(words.into())
}

/// Normalized bag-of-words over vocabulary ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentDistribution {
    pub support: Vec<usize>,
    pub counts: Vec<u32>,
    pub mass: Vec<f64>,
    pub total_words: u32,
}

impl DocumentDistribution {
    /// Builds a distribution from `(word id, count)` pairs. Zero counts are
    /// ignored and repeated ids are merged.
    pub fn from_counts<I>(counts: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, u32)>,
    {
        let mut merged: BTreeMap<usize, u32> = BTreeMap::new();
        for (id, c) in counts {
            if c > 0 {
                *merged.entry(id).or_default() += c;
            }
        }
        let total: u32 = merged.values().sum();
        if total == 0 {
            return Err(Error::EmptyDocument);
        }
        let (support, counts): (Vec<usize>, Vec<u32>) = merged.into_iter().unzip();
        let mass = counts.iter().map(|&c| c as f64 / total as f64).collect();
        Ok(DocumentDistribution {
            support,
            counts,
            mass,
            total_words: total,
        })
    }

    pub fn unique_words(&self) -> usize {
        self.support.len()
    }

    /// Dense mass vector of length `vocab_size`.
    pub fn dense(&self, vocab_size: usize) -> Vec<f64> {
        let mut out = vec![0.0; vocab_size];
        for (&id, &m) in self.support.iter().zip(&self.mass) {
            out[id] = m;
        }
        out
    }
}

/// Counts in-vocabulary tokens; out-of-vocabulary tokens are dropped before
/// the document length is taken.
pub fn to_distribution(doc: &RawDocument, vocab: &Vocabulary) -> Result<DocumentDistribution> {
    DocumentDistribution::from_counts(doc.tokens.iter().filter_map(|t| vocab.id(t)).map(|id| (id, 1)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub vocabulary: Vocabulary,
    pub ids: Vec<String>,
    pub documents: Vec<DocumentDistribution>,
    pub labels: Vec<String>,
    pub class_set: Vec<String>,
}

impl Corpus {
    pub fn new(
        vocabulary: Vocabulary,
        ids: Vec<String>,
        documents: Vec<DocumentDistribution>,
        labels: Vec<String>,
    ) -> Result<Self> {
        if documents.len() != labels.len() || documents.len() != ids.len() {
            return Err(Error::Shape(format!(
                "{} documents, {} labels, {} ids",
                documents.len(),
                labels.len(),
                ids.len()
            )));
        }
        for doc in &documents {
            if let Some(&bad) = doc.support.iter().find(|&&id| id >= vocabulary.len()) {
                return Err(Error::Shape(format!(
                    "word id {bad} outside vocabulary of size {}",
                    vocabulary.len()
                )));
            }
        }
        if labels.iter().any(String::is_empty) {
            return Err(Error::InvalidParameter("empty label".into()));
        }
        let class_set = labels
            .iter()
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        Ok(Corpus {
            vocabulary,
            ids,
            documents,
            labels,
            class_set,
        })
    }

    /// Converts raw documents, skipping those left empty by vocabulary
    /// filtering. Returns the ids of skipped documents alongside the corpus.
    pub fn from_raw(raw: &[RawDocument], vocabulary: Vocabulary) -> Result<(Self, Vec<String>)> {
        let mut ids = Vec::new();
        let mut docs = Vec::new();
        let mut labels = Vec::new();
        let mut dropped = Vec::new();
        for doc in raw {
            match to_distribution(doc, &vocabulary) {
                Ok(d) => {
                    ids.push(doc.id.clone());
                    docs.push(d);
                    labels.push(doc.label.clone());
                }
                Err(Error::EmptyDocument) => dropped.push(doc.id.clone()),
                Err(e) => return Err(e),
            }
        }
        Ok((Corpus::new(vocabulary, ids, docs, labels)?, dropped))
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    /// Subset of documents, in the given order, sharing this vocabulary.
    pub fn select(&self, indices: &[usize]) -> Corpus {
        let pick = |v: &Vec<String>| indices.iter().map(|&i| v[i].clone()).collect::<Vec<_>>();
        let documents = indices.iter().map(|&i| self.documents[i].clone()).collect();
        let labels = pick(&self.labels);
        let class_set = labels
            .iter()
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        Corpus {
            vocabulary: self.vocabulary.clone(),
            ids: pick(&self.ids),
            documents,
            labels,
            class_set,
        }
    }

    /// Stable 64-bit FNV-1a digest of vocabulary size and document counts;
    /// identifies the corpus a topic model was trained on.
    pub fn fingerprint(&self) -> u64 {
        const PRIME: u64 = 0x0000_0100_0000_01b3;
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut feed = |x: u64| {
            for b in x.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(PRIME);
            }
        };
        feed(self.vocabulary.len() as u64);
        feed(self.documents.len() as u64);
        for doc in &self.documents {
            feed(doc.support.len() as u64);
            for (&id, &c) in doc.support.iter().zip(&doc.counts) {
                feed(id as u64);
                feed(c as u64);
            }
        }
        h
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitMode {
    InOrder,
    Shuffled { seed: u64 },
}

/// Takes the first `ceil(train_fraction * n)` documents (after an optional
/// seeded shuffle) as training data and the rest as test data.
pub fn split_corpus(corpus: &Corpus, train_fraction: f64, mode: SplitMode) -> Result<(Corpus, Corpus)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidSplit(format!(
            "train fraction {train_fraction} outside (0, 1)"
        )));
    }
    let n = corpus.len();
    // The epsilon keeps exact products like 0.8 * 10 from rounding up.
    let n_train = ((train_fraction * n as f64) - 1e-9).ceil().max(0.0) as usize;
    if n_train == 0 || n_train >= n {
        return Err(Error::InvalidSplit(format!(
            "{n} documents at fraction {train_fraction} give {n_train} train and {} test",
            n.saturating_sub(n_train)
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    if let SplitMode::Shuffled { seed } = mode {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    let (train, test) = order.split_at(n_train);
    Ok((corpus.select(train), corpus.select(test)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(tokens: &[&str]) -> RawDocument {
        RawDocument {
            id: String::new(),
            label: "x".into(),
            tokens: tokens.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn vocab(words: &[&str]) -> Vocabulary {
        Vocabulary::new(words.iter().map(|s| s.to_string()).collect()).unwrap()
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(tokenize("Cats chase cats!", true), vec!["cats", "chase", "cats"]);
        assert!(tokenize("", true).is_empty());
        assert_eq!(tokenize("a1b", true), vec!["a", "b"]);
        assert_eq!(tokenize("Hello", false), vec!["Hello"]);
    }

    // Straight per-character reference written independently of `tokenize`.
    fn reference_tokenize(s: &str) -> Vec<String> {
        let lowered: String = s.chars().flat_map(|c| c.to_lowercase()).collect();
        let replaced: String = lowered
            .chars()
            .map(|c| if c.is_alphabetic() { c } else { ' ' })
            .collect();
        replaced.split_whitespace().map(str::to_string).collect()
    }

    #[test]
    fn tokenize_matches_reference_on_fixture() {
        let fixture = [
            "", " ", "a", "a1b", "1a2b3", "...", "foo-bar", "Foo_Bar", "x\ty\nz", "ÉCOLE été",
            "it's", "don't stop", "123", "a 1 b 2 c", "CamelCase", "UPPER lower", "tab\tsep",
            "end.", ".start", "mid.dle", "über", "naïve café", "α β γ", "mixed123text", "a,b;c:d",
            "(paren)", "[brack]", "{brace}", "q?", "!bang", "x--y", "a  b", "emoji🙂ok",
            "под ключ", "中文字", "trailing ", " leading", "line\r\nend", "num3ric4l", "a.b.c",
            "The Quick Brown Fox", "jumps@over", "lazy#dog", "$money", "percent%", "amp&and",
            "star*star", "plus+plus", "eq=eq", "pipe|pipe",
        ];
        assert_eq!(fixture.len(), 50);
        for s in fixture {
            assert_eq!(tokenize(s, true), reference_tokenize(s), "input {s:?}");
        }
    }

    #[test]
    fn vocabulary_min_doc_freq() {
        let docs = [raw(&["a", "b"]), raw(&["a"]), raw(&["a", "c"])];
        let v = build_vocabulary(&docs, 2, 10).unwrap();
        assert_eq!(v.words(), &["a".to_string()]);
    }

    #[test]
    fn vocabulary_max_size_tie_break() {
        let docs = [raw(&["a", "b"]), raw(&["a"]), raw(&["a", "c"])];
        let v = build_vocabulary(&docs, 1, 2).unwrap();
        assert_eq!(v.words(), &["a".to_string(), "b".to_string()]);
    }

    #[test]
    fn vocabulary_ids_lexicographic() {
        let docs = [raw(&["zeta", "alpha", "mu", "mu"])];
        let v = build_vocabulary(&docs, 1, 10).unwrap();
        assert_eq!(v.id("alpha"), Some(0));
        assert_eq!(v.id("mu"), Some(1));
        assert_eq!(v.id("zeta"), Some(2));
        assert_eq!(v.export(), "alpha\nmu\nzeta\n");
    }

    #[test]
    fn vocabulary_empty_error() {
        let docs = [raw(&["a"]), raw(&["b"])];
        assert!(matches!(build_vocabulary(&docs, 2, 10), Err(Error::EmptyVocabulary)));
    }

    #[test]
    fn vocabulary_rejects_duplicates() {
        assert!(Vocabulary::new(vec!["a".into(), "a".into()]).is_err());
        assert!(Vocabulary::new(vec!["".into()]).is_err());
    }

    #[test]
    fn distribution_examples() {
        let v = vocab(&["a", "b"]);
        let d = to_distribution(&raw(&["a", "a", "b"]), &v).unwrap();
        assert_eq!(d.support, vec![0, 1]);
        assert_eq!(d.mass, vec![2.0 / 3.0, 1.0 / 3.0]);

        let d = to_distribution(&raw(&["a", "b", "b", "c"]), &v).unwrap();
        assert_eq!(d.mass, vec![1.0 / 3.0, 2.0 / 3.0]);
        assert_eq!(d.total_words, 3);

        let v = vocab(&["a"]);
        assert!(matches!(
            to_distribution(&raw(&["z"]), &v),
            Err(Error::EmptyDocument)
        ));
    }

    #[test]
    fn read_corpus_format() {
        let text = "sport\tThe match, 2-1!\n\nnews\tVote today\n";
        let docs = read_corpus(text.as_bytes(), true).unwrap();
        assert_eq!(docs.len(), 2);
        assert_eq!(docs[0].label, "sport");
        assert_eq!(docs[0].tokens, vec!["the", "match"]);
        assert_eq!(docs[1].id, "d1");
        assert!(matches!(
            read_corpus("no tab here".as_bytes(), true),
            Err(Error::CorpusFormat { line: 1, .. })
        ));
    }

    fn ten_docs() -> Corpus {
        let v = vocab(&["a", "b"]);
        let docs: Vec<_> = (0..10)
            .map(|i| DocumentDistribution::from_counts([(0, i + 1), (1, 1)]).unwrap())
            .collect();
        let ids = (0..10).map(|i| format!("d{i}")).collect();
        let labels = (0..10).map(|i| format!("c{}", i % 3)).collect();
        Corpus::new(v, ids, docs, labels).unwrap()
    }

    #[test]
    fn split_in_order() {
        let c = ten_docs();
        let (train, test) = split_corpus(&c, 0.8, SplitMode::InOrder).unwrap();
        assert_eq!(train.ids, (0..8).map(|i| format!("d{i}")).collect::<Vec<_>>());
        assert_eq!(test.ids, vec!["d8", "d9"]);
        assert_eq!(test.labels, vec!["c2", "c0"]);
    }

    #[test]
    fn split_shuffle_deterministic() {
        let c = ten_docs();
        let a = split_corpus(&c, 0.8, SplitMode::Shuffled { seed: 7 }).unwrap();
        let b = split_corpus(&c, 0.8, SplitMode::Shuffled { seed: 7 }).unwrap();
        assert_eq!(a.0.ids, b.0.ids);
        assert_eq!(a.1.ids, b.1.ids);
        assert_eq!(a.0.len(), 8);
    }

    #[test]
    fn split_empty_is_error() {
        let c = ten_docs().select(&[0, 1, 2, 3, 4]);
        assert!(matches!(
            split_corpus(&c, 0.99, SplitMode::InOrder),
            Err(Error::InvalidSplit(_))
        ));
    }

    #[test]
    fn from_raw_drops_empty_documents() {
        let v = vocab(&["a"]);
        let (c, dropped) = Corpus::from_raw(&[raw(&["a"]), raw(&["z"])], v).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(dropped.len(), 1);
    }

    #[test]
    fn corpus_json_roundtrip() {
        let c = ten_docs();
        let json = serde_json::to_string(&c).unwrap();
        let back: Corpus = serde_json::from_str(&json).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.vocabulary.id("b"), Some(1));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn distribution_is_normalized_and_order_invariant(
                tokens in proptest::collection::vec(0usize..6, 1..40),
                seed in any::<u64>(),
            ) {
                let words = ["a", "b", "c", "d", "e", "f"];
                let v = vocab(&words);
                let doc = raw(&tokens.iter().map(|&i| words[i]).collect::<Vec<_>>());
                let d = to_distribution(&doc, &v).unwrap();
                let total: f64 = d.mass.iter().sum();
                prop_assert!((total - 1.0).abs() <= 1e-9);
                prop_assert!(d.mass.iter().all(|&m| m > 0.0));
                prop_assert!(d.support.windows(2).all(|w| w[0] < w[1]));

                let mut shuffled = doc.clone();
                shuffled.tokens.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
                prop_assert_eq!(to_distribution(&shuffled, &v).unwrap(), d);
            }

            #[test]
            fn vocabulary_is_deterministic(
                docs in proptest::collection::vec(proptest::collection::vec("[a-e]{1,2}", 0..8), 1..6),
                min_df in 1usize..3,
                max in 1usize..8,
            ) {
                let raw_docs: Vec<RawDocument> = docs.iter().map(|t| RawDocument {
                    id: String::new(), label: "x".into(), tokens: t.clone(),
                }).collect();
                let a = build_vocabulary(&raw_docs, min_df, max);
                let b = build_vocabulary(&raw_docs, min_df, max);
                match (a, b) {
                    (Ok(a), Ok(b)) => {
                        prop_assert_eq!(&a, &b);
                        prop_assert!(a.len() <= max);
                        prop_assert!(a.words().windows(2).all(|w| w[0] < w[1]));
                    }
                    (Err(_), Err(_)) => {}
                    _ => prop_assert!(false),
                }
            }
        }
    }
}
