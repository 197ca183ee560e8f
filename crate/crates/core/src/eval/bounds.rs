use ndarray::{Array1, Array2};

use crate::corpus::DocumentDistribution;
use crate::distances::{hott, relaxed_word_mover, topic_cost_matrix, word_mover, TopicCostMatrix, WordHistogram};
use crate::embeddings::{distance_matrix, EmbeddingTable, GroundPower};
use crate::error::{Error, Result};
use crate::topics::TopicModel;
use crate::transport::{hausdorff, solve_exact};

use super::kv_lines;

/// Values and inequality residuals for one document pair. A residual is
/// `lhs - rhs`, so an inequality holds when its residual is `<= 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundReport {
    pub rwmd: f64,
    pub wmd: f64,
    pub hausdorff: f64,
    pub hoftt: f64,
    pub mixture_w1: f64,
    pub kl1: f64,
    pub kl2: f64,
    pub diameter: f64,
    /// rwmd <= wmd
    pub residual_a: f64,
    /// rwmd <= hausdorff
    pub residual_b: f64,
    /// W1(mix1, mix2) <= hoftt
    pub residual_c: f64,
    /// wmd <= hoftt + diam (sqrt(kl1 / 2) + sqrt(kl2 / 2))
    pub residual_d: f64,
}

impl BoundReport {
    pub fn residuals(&self) -> [f64; 4] {
        [self.residual_a, self.residual_b, self.residual_c, self.residual_d]
    }

    pub const CSV_HEADER: &'static str =
        "rwmd,wmd,hausdorff,hoftt,mixture_w1,kl1,kl2,diameter,residual_a,residual_b,residual_c,residual_d";

    pub fn csv_row(&self) -> String {
        [
            self.rwmd,
            self.wmd,
            self.hausdorff,
            self.hoftt,
            self.mixture_w1,
            self.kl1,
            self.kl2,
            self.diameter,
            self.residual_a,
            self.residual_b,
            self.residual_c,
            self.residual_d,
        ]
        .iter()
        .map(f64::to_string)
        .collect::<Vec<_>>()
        .join(",")
    }
}

/// Worst residual of each inequality across many pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundSummary {
    pub pairs: usize,
    pub max_residuals: [f64; 4],
}

impl BoundSummary {
    pub fn from_reports(reports: &[BoundReport]) -> Self {
        let mut max_residuals = [f64::NEG_INFINITY; 4];
        for r in reports {
            for (m, x) in max_residuals.iter_mut().zip(r.residuals()) {
                *m = m.max(x);
            }
        }
        BoundSummary {
            pairs: reports.len(),
            max_residuals,
        }
    }

    pub fn holds(&self, tol: f64) -> bool {
        self.max_residuals.iter().all(|&r| r <= tol)
    }

    pub fn to_kv(&self) -> String {
        kv_lines(&[
            ("pairs", self.pairs.to_string()),
            ("max_residual_a", self.max_residuals[0].to_string()),
            ("max_residual_b", self.max_residuals[1].to_string()),
            ("max_residual_c", self.max_residuals[2].to_string()),
            ("max_residual_d", self.max_residuals[3].to_string()),
        ])
    }
}

/// Precomputed state for checking many pairs against one model: untruncated
/// topics restricted to embedded words, their pairwise W1 costs, and the
/// ground-metric diameter over all embedded words.
pub struct BoundChecker<'a> {
    table: &'a EmbeddingTable,
    embedded: Vec<usize>,
    position: Vec<Option<usize>>,
    topics: Array2<f64>,
    ground: Array2<f64>,
    costs: TopicCostMatrix,
    diameter: f64,
}

impl<'a> BoundChecker<'a> {
    pub fn new(model: &TopicModel, table: &'a EmbeddingTable) -> Result<Self> {
        let costs = topic_cost_matrix(model, table, usize::MAX, GroundPower::One)?;
        let embedded = table.embedded_ids();
        let mut position = vec![None; table.vocab_size()];
        for (p, &w) in embedded.iter().enumerate() {
            position[w] = Some(p);
        }
        let mut topics = Array2::zeros((model.num_topics, embedded.len()));
        for (t, mut row) in topics.outer_iter_mut().enumerate() {
            for (p, &w) in embedded.iter().enumerate() {
                row[p] = model.topic_word[[t, w]];
            }
            let s = row.sum();
            if s <= 0.0 {
                return Err(Error::TopicUnembedded(t));
            }
            row.mapv_inplace(|x| x / s);
        }
        let ground = distance_matrix(&embedded, &embedded, table)?;
        let diameter = ground.iter().copied().fold(0.0, f64::max);
        Ok(BoundChecker {
            table,
            embedded,
            position,
            topics,
            ground,
            costs,
            diameter,
        })
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    pub fn topic_costs(&self) -> &TopicCostMatrix {
        &self.costs
    }

    fn mixture(&self, proportions: &[f64]) -> Array1<f64> {
        Array1::from(proportions.to_vec()).dot(&self.topics)
    }

    fn kl(&self, doc: &WordHistogram, mix: &Array1<f64>) -> Result<f64> {
        let mut kl = 0.0;
        for (&w, &m) in doc.support.iter().zip(&doc.mass) {
            let q = self.position[w].map(|p| mix[p]).unwrap_or(0.0);
            if q <= 0.0 {
                return Err(Error::KlUndefined(w));
            }
            kl += m * (m / q).ln();
        }
        Ok(kl.max(0.0))
    }

    pub fn check(
        &self,
        d1: &DocumentDistribution,
        d2: &DocumentDistribution,
        proportions1: &[f64],
        proportions2: &[f64],
    ) -> Result<BoundReport> {
        let h1 = WordHistogram::from_document(d1, self.table)?;
        let h2 = WordHistogram::from_document(d2, self.table)?;
        let one = GroundPower::One;
        let wmd = word_mover(&h1, &h2, self.table, one)?;
        let rwmd = relaxed_word_mover(&h1, &h2, self.table, one)?;
        let hausdorff = hausdorff(distance_matrix(&h1.support, &h2.support, self.table)?.view())?;
        let hoftt = hott(proportions1, proportions2, &self.costs, false)?;
        let mix1 = self.mixture(proportions1);
        let mix2 = self.mixture(proportions2);
        let mixture_w1 = solve_exact(mix1.as_slice().unwrap(), mix2.as_slice().unwrap(), self.ground.view())?.cost;
        let kl1 = self.kl(&h1, &mix1)?;
        let kl2 = self.kl(&h2, &mix2)?;
        let slack = self.diameter * ((0.5 * kl1).sqrt() + (0.5 * kl2).sqrt());
        Ok(BoundReport {
            rwmd,
            wmd,
            hausdorff,
            hoftt,
            mixture_w1,
            kl1,
            kl2,
            diameter: self.diameter,
            residual_a: rwmd - wmd,
            residual_b: rwmd - hausdorff,
            residual_c: mixture_w1 - hoftt,
            residual_d: wmd - (hoftt + slack),
        })
    }

    pub fn embedded_words(&self) -> &[usize] {
        &self.embedded
    }
}

/// One-off check of a single pair; see [`BoundChecker`] for many pairs.
pub fn check_bounds(
    d1: &DocumentDistribution,
    d2: &DocumentDistribution,
    proportions1: &[f64],
    proportions2: &[f64],
    model: &TopicModel,
    table: &EmbeddingTable,
) -> Result<BoundReport> {
    BoundChecker::new(model, table)?.check(d1, d2, proportions1, proportions2)
}
