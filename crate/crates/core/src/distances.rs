//! Document distances: WMD and its truncated and relaxed variants, topic
//! transport (HOTT and its untruncated form HOFTT), vector-space distances,
//! and the pairwise distance-matrix engine.

use std::fmt;
use std::io::Write;
use std::ops::Range;
use std::str::FromStr;
use std::time::Instant;

use ndarray::{Array2, ArrayView2, Axis};
use rayon::prelude::*;

use crate::baselines::{vector_distance, VectorKind, VectorMethod};
use crate::container::Container;
use crate::corpus::{Corpus, DocumentDistribution};
use crate::embeddings::{distance_matrix, EmbeddingTable, GroundPower};
use crate::error::{Error, Result};
use crate::topics::{truncate_proportions, truncate_topic, TopicModel};
use crate::transport::{relaxed_cost, wasserstein};

/// Word distribution restricted to embedded words.
#[derive(Debug, Clone, PartialEq)]
pub struct WordHistogram {
    pub support: Vec<usize>,
    pub mass: Vec<f64>,
}

impl WordHistogram {
    /// Drops words without an embedding and renormalizes.
    pub fn embedded(support: &[usize], mass: &[f64], table: &EmbeddingTable) -> Result<Self> {
        let (support, mass): (Vec<usize>, Vec<f64>) = support
            .iter()
            .zip(mass)
            .filter(|(&w, &m)| m > 0.0 && table.contains(w))
            .map(|(&w, &m)| (w, m))
            .unzip();
        let total: f64 = mass.iter().sum();
        if support.is_empty() || total <= 0.0 {
            return Err(Error::EmptyDocument);
        }
        let mass = mass.into_iter().map(|m| m / total).collect();
        Ok(WordHistogram { support, mass })
    }

    pub fn from_document(doc: &DocumentDistribution, table: &EmbeddingTable) -> Result<Self> {
        Self::embedded(&doc.support, &doc.mass, table)
    }
}

/// Keeps the `k` heaviest words (ties by ascending id), in id order.
fn top_words(support: &[usize], mass: &[f64], k: usize) -> (Vec<usize>, Vec<f64>) {
    if support.len() <= k {
        return (support.to_vec(), mass.to_vec());
    }
    let mut order: Vec<usize> = (0..support.len()).collect();
    order.sort_by(|&a, &b| mass[b].total_cmp(&mass[a]).then(support[a].cmp(&support[b])));
    order.truncate(k);
    order.sort_by_key(|&i| support[i]);
    (order.iter().map(|&i| support[i]).collect(), order.iter().map(|&i| mass[i]).collect())
}

pub fn word_mover(a: &WordHistogram, b: &WordHistogram, table: &EmbeddingTable, power: GroundPower) -> Result<f64> {
    let dist = distance_matrix(&a.support, &b.support, table)?;
    wasserstein(&a.mass, &b.mass, dist.view(), power)
}

pub fn relaxed_word_mover(
    a: &WordHistogram,
    b: &WordHistogram,
    table: &EmbeddingTable,
    power: GroundPower,
) -> Result<f64> {
    let cost = distance_matrix(&a.support, &b.support, table)?.mapv(|d| power.apply(d));
    Ok(power.root(relaxed_cost(&a.mass, &b.mass, cost.view())?.value))
}

pub fn wmd(d1: &DocumentDistribution, d2: &DocumentDistribution, table: &EmbeddingTable, power: GroundPower) -> Result<f64> {
    word_mover(
        &WordHistogram::from_document(d1, table)?,
        &WordHistogram::from_document(d2, table)?,
        table,
        power,
    )
}

fn truncated_histogram(doc: &DocumentDistribution, table: &EmbeddingTable, k: usize) -> Result<WordHistogram> {
    let (support, mass) = top_words(&doc.support, &doc.mass, k);
    WordHistogram::embedded(&support, &mass, table)
}

/// WMD after reducing each document to its `k` highest-mass words.
pub fn wmd_truncated(
    d1: &DocumentDistribution,
    d2: &DocumentDistribution,
    table: &EmbeddingTable,
    k: usize,
    power: GroundPower,
) -> Result<f64> {
    word_mover(
        &truncated_histogram(d1, table, k)?,
        &truncated_histogram(d2, table, k)?,
        table,
        power,
    )
}

pub fn rwmd(d1: &DocumentDistribution, d2: &DocumentDistribution, table: &EmbeddingTable, power: GroundPower) -> Result<f64> {
    relaxed_word_mover(
        &WordHistogram::from_document(d1, table)?,
        &WordHistogram::from_document(d2, table)?,
        table,
        power,
    )
}

/// Pairwise WMD between (truncated) topics.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicCostMatrix {
    pub costs: Array2<f64>,
    pub truncation_k: usize,
    pub ground_power: GroundPower,
}

impl TopicCostMatrix {
    pub fn num_topics(&self) -> usize {
        self.costs.nrows()
    }

    pub fn to_container(&self) -> Container {
        let mut c = Container::new("topic_costs");
        c.push("num_topics", self.num_topics())
            .push("truncation_k", self.truncation_k)
            .push("ground_power", self.ground_power.as_int());
        c.push_array("costs", self.costs.clone());
        c
    }

    pub fn from_container(mut c: Container) -> Result<Self> {
        c.expect_kind("topic_costs")?;
        let truncation_k = c.parse("truncation_k")?;
        let ground_power = GroundPower::from_int(c.parse("ground_power")?)?;
        let costs = c.take_array("costs")?;
        if costs.nrows() != costs.ncols() {
            return Err(Error::Container("topic cost matrix is not square".into()));
        }
        Ok(TopicCostMatrix {
            costs,
            truncation_k,
            ground_power,
        })
    }
}

/// Topic `t` cut to its `k` heaviest words, then restricted to embedded words.
pub fn topic_histogram(model: &TopicModel, t: usize, table: &EmbeddingTable, k: usize) -> Result<WordHistogram> {
    let row = model.topic(t).to_vec();
    let tt = truncate_topic(&row, k);
    let mut pairs: Vec<(usize, f64)> = tt.support.into_iter().zip(tt.mass).collect();
    pairs.sort_by_key(|p| p.0);
    let (support, mass): (Vec<usize>, Vec<f64>) = pairs.into_iter().unzip();
    WordHistogram::embedded(&support, &mass, table).map_err(|_| Error::TopicUnembedded(t))
}

/// WMD between every pair of topics truncated to `k` words. Pass
/// `usize::MAX` (or any `k >= |V|`) for untruncated topics.
pub fn topic_cost_matrix(
    model: &TopicModel,
    table: &EmbeddingTable,
    k: usize,
    power: GroundPower,
) -> Result<TopicCostMatrix> {
    if k == 0 {
        return Err(Error::InvalidParameter("topic truncation must keep at least one word".into()));
    }
    if model.vocab_size != table.vocab_size() {
        return Err(Error::Shape(format!(
            "model vocabulary {} differs from embedding table vocabulary {}",
            model.vocab_size,
            table.vocab_size()
        )));
    }
    let t = model.num_topics;
    let topics = (0..t)
        .map(|i| topic_histogram(model, i, table, k))
        .collect::<Result<Vec<_>>>()?;
    let pairs: Vec<(usize, usize)> = (0..t).flat_map(|i| (i + 1..t).map(move |j| (i, j))).collect();
    let values = pairs
        .par_iter()
        .map(|&(i, j)| word_mover(&topics[i], &topics[j], table, power))
        .collect::<Result<Vec<_>>>()?;
    let mut costs = Array2::zeros((t, t));
    for (&(i, j), &v) in pairs.iter().zip(&values) {
        costs[[i, j]] = v;
        costs[[j, i]] = v;
    }
    Ok(TopicCostMatrix {
        costs,
        truncation_k: k.min(model.vocab_size),
        ground_power: power,
    })
}

/// Transport between topic proportions with topic costs as the ground
/// metric. `truncate` selects HOTT (proportions cut at `1 / (|T| + 1)`);
/// otherwise the full proportions are used (HOFTT).
pub fn hott(p1: &[f64], p2: &[f64], costs: &TopicCostMatrix, truncate: bool) -> Result<f64> {
    let t = costs.num_topics();
    if p1.len() != t || p2.len() != t {
        return Err(Error::Shape(format!(
            "proportions of length {} and {} for {t} topics",
            p1.len(),
            p2.len()
        )));
    }
    if truncate {
        let s1 = truncate_proportions(p1);
        let s2 = truncate_proportions(p2);
        let sub = costs.costs.select(Axis(0), &s1.topics).select(Axis(1), &s2.topics);
        wasserstein(&s1.mass, &s2.mass, sub.view(), costs.ground_power)
    } else {
        wasserstein(p1, p2, costs.costs.view(), costs.ground_power)
    }
}

/// Metric descriptor: name plus parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    Wmd { power: GroundPower },
    WmdTruncated { k: usize, power: GroundPower },
    Rwmd { power: GroundPower },
    Hott,
    Hoftt,
    Vector { method: VectorMethod, kind: VectorKind },
}

impl Metric {
    pub fn needs_embeddings(&self) -> bool {
        matches!(self, Metric::Wmd { .. } | Metric::WmdTruncated { .. } | Metric::Rwmd { .. })
    }

    pub fn needs_topic_costs(&self) -> bool {
        matches!(self, Metric::Hott | Metric::Hoftt)
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::Wmd { power } => write!(f, "wmd:p={}", power.as_int()),
            Metric::WmdTruncated { k, power } => write!(f, "wmd-t:k={k}:p={}", power.as_int()),
            Metric::Rwmd { power } => write!(f, "rwmd:p={}", power.as_int()),
            Metric::Hott => f.write_str("hott"),
            Metric::Hoftt => f.write_str("hoftt"),
            Metric::Vector { method, kind } => write!(f, "{method}:{kind}"),
        }
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("unknown metric {s:?}"));
        let param = |part: Option<&str>, key: &str| -> Result<u64> {
            part.and_then(|p| p.strip_prefix(key))
                .and_then(|v| v.parse().ok())
                .ok_or_else(bad)
        };
        let parts: Vec<&str> = s.split(':').collect();
        let power = |part: Option<&str>| -> Result<GroundPower> { GroundPower::from_int(param(part, "p=")? as u32) };
        match parts[0] {
            "hott" if parts.len() == 1 => Ok(Metric::Hott),
            "hoftt" if parts.len() == 1 => Ok(Metric::Hoftt),
            "wmd" if parts.len() == 2 => Ok(Metric::Wmd { power: power(parts.get(1).copied())? }),
            "rwmd" if parts.len() == 2 => Ok(Metric::Rwmd { power: power(parts.get(1).copied())? }),
            "wmd-t" if parts.len() == 3 => Ok(Metric::WmdTruncated {
                k: param(parts.get(1).copied(), "k=")? as usize,
                power: power(parts.get(2).copied())?,
            }),
            _ if parts.len() >= 2 => {
                let (method, kind) = s.rsplit_once(':').ok_or_else(bad)?;
                Ok(Metric::Vector {
                    method: method.parse()?,
                    kind: kind.parse()?,
                })
            }
            _ => Err(bad()),
        }
    }
}

enum Items<'a> {
    Words {
        table: &'a EmbeddingTable,
        docs: Vec<WordHistogram>,
    },
    Topics {
        costs: &'a TopicCostMatrix,
        proportions: Array2<f64>,
    },
    Vectors {
        vectors: Array2<f64>,
    },
}

/// A metric bound to a fixed pool of documents, addressed by index. All
/// preprocessing that depends on a single document happens once here.
pub struct PreparedMetric<'a> {
    metric: Metric,
    ids: Vec<String>,
    items: Items<'a>,
}

impl<'a> PreparedMetric<'a> {
    /// Word-level metrics over the concatenation of `corpora`.
    pub fn words(metric: Metric, table: &'a EmbeddingTable, corpora: &[&Corpus]) -> Result<Self> {
        let mut ids = Vec::new();
        let mut docs = Vec::new();
        for c in corpora {
            for (id, doc) in c.ids.iter().zip(&c.documents) {
                let h = match metric {
                    Metric::Wmd { .. } | Metric::Rwmd { .. } => WordHistogram::from_document(doc, table),
                    Metric::WmdTruncated { k, .. } => truncated_histogram(doc, table, k),
                    _ => return Err(Error::InvalidParameter(format!("{metric} is not a word-level metric"))),
                }
                .map_err(|e| Error::Document {
                    id: id.clone(),
                    source: Box::new(e),
                })?;
                ids.push(id.clone());
                docs.push(h);
            }
        }
        Ok(PreparedMetric {
            metric,
            ids,
            items: Items::Words { table, docs },
        })
    }

    /// HOTT (`truncate`) or HOFTT over rows of `proportions`.
    pub fn topics(
        truncate: bool,
        costs: &'a TopicCostMatrix,
        ids: Vec<String>,
        proportions: Array2<f64>,
    ) -> Result<Self> {
        if proportions.ncols() != costs.num_topics() || proportions.nrows() != ids.len() {
            return Err(Error::Shape(format!(
                "{}x{} proportions for {} documents and {} topics",
                proportions.nrows(),
                proportions.ncols(),
                ids.len(),
                costs.num_topics()
            )));
        }
        Ok(PreparedMetric {
            metric: if truncate { Metric::Hott } else { Metric::Hoftt },
            ids,
            items: Items::Topics { costs, proportions },
        })
    }

    pub fn vectors(method: VectorMethod, kind: VectorKind, ids: Vec<String>, vectors: Array2<f64>) -> Result<Self> {
        if vectors.nrows() != ids.len() {
            return Err(Error::Shape(format!("{} vectors for {} documents", vectors.nrows(), ids.len())));
        }
        Ok(PreparedMetric {
            metric: Metric::Vector { method, kind },
            ids,
            items: Items::Vectors { vectors },
        })
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    fn raw_distance(&self, a: usize, b: usize) -> Result<f64> {
        match (&self.items, self.metric) {
            (Items::Words { table, docs }, Metric::Rwmd { power }) => relaxed_word_mover(&docs[a], &docs[b], table, power),
            (Items::Words { table, docs }, Metric::Wmd { power } | Metric::WmdTruncated { power, .. }) => {
                word_mover(&docs[a], &docs[b], table, power)
            }
            (Items::Topics { costs, proportions }, m) => {
                let (pa, pb) = (proportions.row(a), proportions.row(b));
                hott(&pa.to_vec(), &pb.to_vec(), costs, m == Metric::Hott)
            }
            (Items::Vectors { vectors }, Metric::Vector { kind, .. }) => {
                vector_distance(&vectors.row(a).to_vec(), &vectors.row(b).to_vec(), kind)
            }
            _ => unreachable!("constructors pair items with matching metrics"),
        }
    }

    /// Distance between pool members `a` and `b`; failures name both ids.
    pub fn distance(&self, a: usize, b: usize) -> Result<f64> {
        self.raw_distance(a, b).map_err(|e| Error::Pair {
            a: self.ids[a].clone(),
            b: self.ids[b].clone(),
            source: Box::new(e),
        })
    }
}

/// Symmetric document distance matrix with document metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    pub values: Array2<f64>,
    pub ids: Vec<String>,
    pub labels: Vec<String>,
    pub metric: String,
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl DistanceMatrix {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn to_container(&self) -> Container {
        let mut c = Container::new("distance_matrix");
        c.push("n", self.len()).push("metric", &self.metric);
        for (id, label) in self.ids.iter().zip(&self.labels) {
            c.push("id", id).push("label", label);
        }
        c.push_array("distances", self.values.clone());
        c
    }

    pub fn from_container(mut c: Container) -> Result<Self> {
        c.expect_kind("distance_matrix")?;
        let n: usize = c.parse("n")?;
        let metric = c.require("metric")?.to_string();
        let ids: Vec<String> = c.get_all("id").map(str::to_string).collect();
        let labels: Vec<String> = c.get_all("label").map(str::to_string).collect();
        let values = c.take_array("distances")?;
        if ids.len() != n || labels.len() != n || values.dim() != (n, n) {
            return Err(Error::Container("distance matrix header disagrees with payload".into()));
        }
        Ok(DistanceMatrix {
            values,
            ids,
            labels,
            metric,
        })
    }

    /// Header row `id,label,<ids>`, then one row per document.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        write!(w, "id,label")?;
        for id in &self.ids {
            write!(w, ",{}", csv_field(id))?;
        }
        writeln!(w)?;
        for (i, row) in self.values.outer_iter().enumerate() {
            write!(w, "{},{}", csv_field(&self.ids[i]), csv_field(&self.labels[i]))?;
            for v in row {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Wall-clock cost of a pairwise computation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Throughput {
    pub pairs: usize,
    pub seconds: f64,
    pub pairs_per_second: f64,
}

impl Throughput {
    pub fn new(pairs: usize, seconds: f64) -> Self {
        Throughput {
            pairs,
            seconds,
            pairs_per_second: if seconds > 0.0 { pairs as f64 / seconds } else { f64::INFINITY },
        }
    }
}

/// All `n (n - 1) / 2` distances of the pool, each computed once and
/// mirrored. Pairs run on the current rayon pool; the result does not depend
/// on the number of workers.
pub fn pairwise_matrix(metric: &PreparedMetric<'_>, labels: &[String]) -> Result<(DistanceMatrix, Throughput)> {
    let n = metric.len();
    if labels.len() != n {
        return Err(Error::Shape(format!("{} labels for {n} documents", labels.len())));
    }
    let start = Instant::now();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let values = pairs
        .par_iter()
        .map(|&(i, j)| metric.distance(i, j))
        .collect::<Result<Vec<_>>>()?;
    let mut matrix = Array2::zeros((n, n));
    for (&(i, j), &v) in pairs.iter().zip(&values) {
        matrix[[i, j]] = v;
        matrix[[j, i]] = v;
    }
    let elapsed = start.elapsed().as_secs_f64();
    Ok((
        DistanceMatrix {
            values: matrix,
            ids: metric.ids().to_vec(),
            labels: labels.to_vec(),
            metric: metric.metric().to_string(),
        },
        Throughput::new(pairs.len(), elapsed),
    ))
}

/// Distances from pool members `rows` to pool members `cols`, in parallel
/// over rows.
pub fn cross_distances(metric: &PreparedMetric<'_>, rows: Range<usize>, cols: Range<usize>) -> Result<Array2<f64>> {
    let m = cols.len();
    let out = rows
        .clone()
        .into_par_iter()
        .map(|i| cols.clone().map(|j| metric.distance(i, j)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    Ok(Array2::from_shape_fn((rows.len(), m), |(i, j)| out[i][j]))
}

/// Checks a square matrix for a zero diagonal, symmetry and nonnegativity.
pub fn is_distance_matrix(m: ArrayView2<'_, f64>, tol: f64) -> bool {
    let n = m.nrows();
    m.ncols() == n
        && (0..n).all(|i| m[[i, i]] == 0.0)
        && (0..n).all(|i| (0..n).all(|j| m[[i, j]] >= 0.0 && (m[[i, j]] - m[[j, i]]).abs() <= tol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Vocabulary;
    use crate::transport::{brute_force_reference, solve_exact};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn vocab(n: usize) -> Vocabulary {
        Vocabulary::new((0..n).map(|i| format!("w{i}")).collect()).unwrap()
    }

    fn random_table(n: usize, dim: usize, seed: u64) -> EmbeddingTable {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vecs = (0..n)
            .map(|_| Some((0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()))
            .collect();
        EmbeddingTable::from_vectors(&vocab(n), vecs).unwrap()
    }

    fn line_table(points: &[f64]) -> EmbeddingTable {
        EmbeddingTable::from_vectors(&vocab(points.len()), points.iter().map(|&x| Some(vec![x])).collect()).unwrap()
    }

    fn doc(pairs: &[(usize, u32)]) -> DocumentDistribution {
        DocumentDistribution::from_counts(pairs.iter().copied()).unwrap()
    }

    fn random_doc(rng: &mut ChaCha8Rng, v: usize, words: usize) -> DocumentDistribution {
        DocumentDistribution::from_counts((0..words).map(|_| (rng.random_range(0..v), rng.random_range(1..4)))).unwrap()
    }

    fn one() -> GroundPower {
        GroundPower::One
    }

    #[test]
    fn wmd_examples() {
        let t = random_table(6, 3, 1);
        let d = doc(&[(0, 1), (2, 3), (5, 1)]);
        assert_eq!(wmd(&d, &d, &t, one()).unwrap(), 0.0);
        let x = doc(&[(1, 2)]);
        let y = doc(&[(4, 7)]);
        assert_eq!(wmd(&x, &y, &t, one()).unwrap(), t.distance(1, 4).unwrap());
    }

    #[test]
    fn wmd_matches_oracle() {
        let t = random_table(12, 4, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let a = random_doc(&mut rng, 12, 3);
            let b = random_doc(&mut rng, 12, 3);
            if a.support.len() * b.support.len() > 12 {
                continue;
            }
            let dist = distance_matrix(&a.support, &b.support, &t).unwrap();
            let oracle = brute_force_reference(&a.mass, &b.mass, dist.view()).unwrap();
            assert!((wmd(&a, &b, &t, one()).unwrap() - oracle).abs() <= 1e-9);
        }
    }

    #[test]
    fn wmd_drops_unembedded_words() {
        let v = vocab(3);
        let t = EmbeddingTable::from_vectors(&v, vec![Some(vec![0.0]), None, Some(vec![2.0])]).unwrap();
        // word 1 is dropped, leaving all mass at 0 vs all at 2
        let a = doc(&[(0, 1), (1, 5)]);
        let b = doc(&[(2, 1)]);
        assert_eq!(wmd(&a, &b, &t, one()).unwrap(), 2.0);
        let only_missing = doc(&[(1, 2)]);
        assert!(matches!(wmd(&only_missing, &b, &t, one()), Err(Error::EmptyDocument)));
    }

    #[test]
    fn truncated_wmd_examples() {
        let t = random_table(10, 3, 4);
        let a = doc(&[(0, 1), (3, 2), (7, 1)]);
        let b = doc(&[(1, 4), (2, 1)]);
        assert_eq!(
            wmd_truncated(&a, &b, &t, 3, one()).unwrap(),
            wmd(&a, &b, &t, one()).unwrap()
        );
        // k = 1 keeps the modal words 3 and 1
        assert_eq!(wmd_truncated(&a, &b, &t, 1, one()).unwrap(), t.distance(3, 1).unwrap());
        // ties go to the lower id
        let tie = doc(&[(5, 1), (2, 1)]);
        assert_eq!(wmd_truncated(&tie, &b, &t, 1, one()).unwrap(), t.distance(2, 1).unwrap());
    }

    #[test]
    fn rwmd_examples() {
        let t = line_table(&[0.0, 1.0, 5.0]);
        let a = doc(&[(0, 9), (2, 1)]);
        let b = doc(&[(0, 1), (2, 9)]);
        assert_eq!(rwmd(&a, &b, &t, one()).unwrap(), 0.0);
        assert!(wmd(&a, &b, &t, one()).unwrap() > 3.0);
        let x = doc(&[(1, 1)]);
        assert_eq!(rwmd(&x, &b, &t, one()).unwrap(), wmd(&x, &b, &t, one()).unwrap());
        let y = doc(&[(2, 3)]);
        assert_eq!(rwmd(&x, &y, &t, one()).unwrap(), wmd(&x, &y, &t, one()).unwrap());
    }

    #[test]
    fn rwmd_below_wmd_on_random_pairs() {
        let t = random_table(30, 5, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for power in [GroundPower::One, GroundPower::Two] {
            for _ in 0..100 {
                let a = random_doc(&mut rng, 30, 8);
                let b = random_doc(&mut rng, 30, 8);
                assert!(rwmd(&a, &b, &t, power).unwrap() <= wmd(&a, &b, &t, power).unwrap() + 1e-9);
            }
        }
    }

    fn random_model(t: usize, v: usize, seed: u64) -> TopicModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut tw = Array2::from_shape_fn((t, v), |_| rng.random_range(0.01..1.0));
        for mut row in tw.outer_iter_mut() {
            let s = row.sum();
            row.mapv_inplace(|x| x / s);
        }
        TopicModel::from_parts(tw, Array2::from_elem((1, t), 1.0 / t as f64), 0.1, 0.01).unwrap()
    }

    #[test]
    fn topic_costs_match_direct_solves() {
        let v = 15;
        let t = random_table(v, 3, 7);
        let model = random_model(5, v, 8);
        let k = 6;
        let c = topic_cost_matrix(&model, &t, k, one()).unwrap();
        assert!(is_distance_matrix(c.costs.view(), 1e-9));
        for i in 0..5 {
            for j in 0..5 {
                let a = truncate_topic(&model.topic(i).to_vec(), k);
                let b = truncate_topic(&model.topic(j).to_vec(), k);
                let dist = distance_matrix(&a.support, &b.support, &t).unwrap();
                let direct = solve_exact(&a.mass, &b.mass, dist.view()).unwrap().cost;
                let want = if i == j { 0.0 } else { direct };
                assert!((c.costs[[i, j]] - want).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn topic_cost_examples() {
        let t = line_table(&[0.0, 3.0, 7.0]);
        let mut tw = Array2::from_elem((3, 3), 0.0);
        tw[[0, 0]] = 0.8;
        tw[[0, 1]] = 0.2;
        tw[[1, 0]] = 0.8;
        tw[[1, 1]] = 0.2;
        tw[[2, 2]] = 1.0;
        let m = TopicModel::from_parts(tw, Array2::from_elem((1, 3), 1.0 / 3.0), 0.1, 0.01).unwrap();
        let c = topic_cost_matrix(&m, &t, 1, one()).unwrap();
        assert_eq!(c.costs[[0, 1]], 0.0);
        assert_eq!(c.costs[[0, 2]], 7.0);
        assert_eq!(c.truncation_k, 1);
        assert!(topic_cost_matrix(&m, &t, 0, one()).is_err());
    }

    #[test]
    fn unembedded_topic_is_an_error() {
        let v = vocab(3);
        let table = EmbeddingTable::from_vectors(&v, vec![Some(vec![0.0]), Some(vec![1.0]), None]).unwrap();
        let mut tw = Array2::from_elem((2, 3), 0.0);
        tw[[0, 0]] = 1.0;
        tw[[1, 2]] = 1.0;
        let m = TopicModel::from_parts(tw, Array2::from_elem((1, 2), 0.5), 0.1, 0.01).unwrap();
        assert!(matches!(topic_cost_matrix(&m, &table, 1, one()), Err(Error::TopicUnembedded(1))));
    }

    fn fixed_costs() -> TopicCostMatrix {
        let t = random_table(20, 3, 9);
        topic_cost_matrix(&random_model(6, 20, 10), &t, 5, one()).unwrap()
    }

    #[test]
    fn hott_examples() {
        let c = fixed_costs();
        let p = [0.5, 0.1, 0.1, 0.1, 0.1, 0.1];
        assert_eq!(hott(&p, &p, &c, true).unwrap(), 0.0);
        assert_eq!(hott(&p, &p, &c, false).unwrap(), 0.0);
        let mut a = [0.0; 6];
        let mut b = [0.0; 6];
        a[1] = 1.0;
        b[4] = 1.0;
        assert_eq!(hott(&a, &b, &c, true).unwrap(), c.costs[[1, 4]]);
        assert!(hott(&[1.0], &[1.0], &c, true).is_err());
    }

    #[test]
    fn hott_truncation_changes_support_only() {
        let c = fixed_costs();
        // threshold 1/7: topics 1..5 at 0.1 drop, leaving a point mass at 0
        let p = [0.5, 0.1, 0.1, 0.1, 0.1, 0.1];
        let q = [0.1, 0.5, 0.1, 0.1, 0.1, 0.1];
        assert_eq!(hott(&p, &q, &c, true).unwrap(), c.costs[[0, 1]]);
        assert!(hott(&p, &q, &c, false).unwrap() <= c.costs[[0, 1]] + 1e-12);
    }

    #[test]
    fn singleton_topics_reduce_to_wmd() {
        let v = 8;
        let t = random_table(v, 2, 11);
        let eye = Array2::from_shape_fn((v, v), |(i, j)| if i == j { 1.0 } else { 0.0 });
        let m = TopicModel::from_parts(eye, Array2::from_elem((1, v), 1.0 / v as f64), 0.1, 0.01).unwrap();
        let c = topic_cost_matrix(&m, &t, 1, one()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..50 {
            let a = random_doc(&mut rng, v, 5);
            let b = random_doc(&mut rng, v, 5);
            let h = hott(&a.dense(v), &b.dense(v), &c, false).unwrap();
            assert!((h - wmd(&a, &b, &t, one()).unwrap()).abs() <= 1e-9);
        }
    }

    #[test]
    fn metric_names_roundtrip() {
        let all = [
            Metric::Wmd { power: GroundPower::Two },
            Metric::WmdTruncated { k: 20, power: one() },
            Metric::Rwmd { power: one() },
            Metric::Hott,
            Metric::Hoftt,
            Metric::Vector {
                method: VectorMethod::Lsi { dim: 7 },
                kind: VectorKind::Cosine,
            },
            Metric::Vector {
                method: VectorMethod::Nbow,
                kind: VectorKind::Euclidean,
            },
        ];
        for m in all {
            assert_eq!(m.to_string().parse::<Metric>().unwrap(), m);
        }
        for bad in ["", "wmd", "hott:x", "wmd:p=3", "nbow:manhattan"] {
            assert!(bad.parse::<Metric>().is_err(), "{bad}");
        }
    }

    fn small_corpus(n: usize, v: usize, seed: u64) -> Corpus {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let docs = (0..n).map(|_| random_doc(&mut rng, v, 6)).collect();
        Corpus::new(
            vocab(v),
            (0..n).map(|i| format!("d{i}")).collect(),
            docs,
            (0..n).map(|i| format!("c{}", i % 2)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn pairwise_single_document() {
        let t = random_table(5, 2, 13);
        let c = small_corpus(1, 5, 14);
        let p = PreparedMetric::words(Metric::Wmd { power: one() }, &t, &[&c]).unwrap();
        let (m, tp) = pairwise_matrix(&p, &c.labels).unwrap();
        assert_eq!(m.values, Array2::<f64>::zeros((1, 1)));
        assert_eq!(tp.pairs, 0);
    }

    #[test]
    fn pairwise_entries_match_single_calls() {
        let v = 25;
        let t = random_table(v, 3, 15);
        let c = small_corpus(30, v, 16);
        let p = PreparedMetric::words(Metric::Wmd { power: one() }, &t, &[&c]).unwrap();
        let (m, tp) = pairwise_matrix(&p, &c.labels).unwrap();
        assert_eq!(tp.pairs, 30 * 29 / 2);
        assert!(is_distance_matrix(m.values.view(), 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let (i, j) = (rng.random_range(0..30), rng.random_range(0..30));
            let (lo, hi) = (i.min(j), i.max(j));
            let want = if i == j { 0.0 } else { wmd(&c.documents[lo], &c.documents[hi], &t, one()).unwrap() };
            assert_eq!(m.values[[i, j]], want);
            if i != j {
                let reversed = wmd(&c.documents[hi], &c.documents[lo], &t, one()).unwrap();
                assert!((m.values[[i, j]] - reversed).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn pairwise_is_independent_of_workers() {
        let v = 25;
        let t = random_table(v, 3, 18);
        let c = small_corpus(20, v, 19);
        let p = PreparedMetric::words(Metric::WmdTruncated { k: 3, power: one() }, &t, &[&c]).unwrap();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| pairwise_matrix(&p, &c.labels).unwrap().0)
        };
        let a = run(1);
        assert_eq!(a.to_container().to_bytes(), run(4).to_container().to_bytes());
    }

    #[test]
    fn pair_errors_name_documents() {
        let v = vocab(3);
        let table = EmbeddingTable::from_vectors(&v, vec![Some(vec![0.0]), Some(vec![1.0]), None]).unwrap();
        let c = Corpus::new(
            v,
            vec!["good".into(), "bad".into()],
            vec![doc(&[(0, 1)]), doc(&[(2, 1)])],
            vec!["a".into(), "b".into()],
        )
        .unwrap();
        let err = PreparedMetric::words(Metric::Wmd { power: one() }, &table, &[&c]).err().unwrap();
        assert!(err.to_string().contains("bad"));

        let costs = fixed_costs();
        let ids = vec!["x".to_string(), "y".to_string()];
        let mut props = Array2::from_elem((2, 6), 1.0 / 6.0);
        props[[1, 0]] = 5.0;
        let p = PreparedMetric::topics(false, &costs, ids, props).unwrap();
        let msg = p.distance(0, 1).unwrap_err().to_string();
        assert!(msg.contains('x') && msg.contains('y'), "{msg}");
    }

    #[test]
    fn cross_distances_match_pairwise() {
        let v = 20;
        let t = random_table(v, 3, 20);
        let a = small_corpus(6, v, 21);
        let b = small_corpus(4, v, 22);
        let p = PreparedMetric::words(Metric::Rwmd { power: one() }, &t, &[&a, &b]).unwrap();
        let x = cross_distances(&p, 6..10, 0..6).unwrap();
        assert_eq!(x.dim(), (4, 6));
        for i in 0..4 {
            for j in 0..6 {
                assert_eq!(x[[i, j]], rwmd(&b.documents[i], &a.documents[j], &t, one()).unwrap());
            }
        }
    }

    #[test]
    fn distance_matrix_persistence() {
        let t = random_table(10, 2, 23);
        let c = small_corpus(5, 10, 24);
        let p = PreparedMetric::words(Metric::Wmd { power: one() }, &t, &[&c]).unwrap();
        let (m, _) = pairwise_matrix(&p, &c.labels).unwrap();
        let back = DistanceMatrix::from_container(Container::read_from(&m.to_container().to_bytes()[..]).unwrap()).unwrap();
        assert_eq!(back, m);

        let mut csv = Vec::new();
        m.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "id,label,d0,d1,d2,d3,d4");
        let row: Vec<&str> = lines[2].split(',').collect();
        assert_eq!(row[0], "d1");
        assert_eq!(row[3].parse::<f64>().unwrap(), m.values[[1, 1]]);
        assert_eq!(row[4].parse::<f64>().unwrap(), m.values[[1, 2]]);
        assert_eq!(csv_field("a,b"), "\"a,b\"");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;
        use std::sync::OnceLock;

        fn costs() -> &'static TopicCostMatrix {
            static C: OnceLock<TopicCostMatrix> = OnceLock::new();
            C.get_or_init(fixed_costs)
        }

        fn proportions() -> impl Strategy<Value = Vec<f64>> {
            proptest::collection::vec(0.001..1.0f64, 6).prop_map(|w| {
                let s: f64 = w.iter().sum();
                w.iter().map(|x| x / s).collect()
            })
        }

        proptest! {
            #[test]
            fn hott_is_a_metric_on_proportions(p in proportions(), q in proportions(), r in proportions()) {
                let c = costs();
                for truncate in [false, true] {
                    let d = |a: &[f64], b: &[f64]| hott(a, b, c, truncate).unwrap();
                    prop_assert_eq!(d(&p, &p), 0.0);
                    prop_assert!((d(&p, &q) - d(&q, &p)).abs() <= 1e-9);
                    prop_assert!(d(&p, &r) <= d(&p, &q) + d(&q, &r) + 1e-8);
                }
            }

            #[test]
            fn rwmd_is_below_wmd(seed in any::<u64>()) {
                let t = random_table(15, 3, seed);
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
                let a = random_doc(&mut rng, 15, 6);
                let b = random_doc(&mut rng, 15, 6);
                prop_assert!(rwmd(&a, &b, &t, one()).unwrap() <= wmd(&a, &b, &t, one()).unwrap() + 1e-9);
            }
        }
    }
}
