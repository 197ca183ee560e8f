use std::collections::BTreeMap;

use ndarray::ArrayView2;

use crate::error::{Error, Result};

use super::kv_lines;

/// Test error per neighborhood size.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnReport {
    pub metric: String,
    pub ks: Vec<usize>,
    pub errors: Vec<f64>,
    pub n_train: usize,
    pub n_test: usize,
}

impl KnnReport {
    /// Lowest error and its `k` (smallest `k` on ties).
    pub fn best(&self) -> (usize, f64) {
        self.ks
            .iter()
            .zip(&self.errors)
            .fold((0, f64::INFINITY), |acc, (&k, &e)| if e < acc.1 { (k, e) } else { acc })
    }

    pub fn error_at(&self, k: usize) -> Option<f64> {
        self.ks.iter().position(|&x| x == k).map(|i| self.errors[i])
    }

    pub fn to_kv(&self) -> String {
        let (best_k, best) = self.best();
        let mut pairs = vec![
            ("metric", self.metric.clone()),
            ("n_train", self.n_train.to_string()),
            ("n_test", self.n_test.to_string()),
            ("best_k", best_k.to_string()),
            ("best_error", best.to_string()),
        ];
        let keys: Vec<String> = self.ks.iter().map(|k| format!("error_k{k}")).collect();
        for (key, e) in keys.iter().zip(&self.errors) {
            pairs.push((key.as_str(), e.to_string()));
        }
        kv_lines(&pairs)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,error\n");
        for (k, e) in self.ks.iter().zip(&self.errors) {
            out.push_str(&format!("{k},{e}\n"));
        }
        out
    }
}

/// Majority label among the `k` nearest training documents. Distance ties
/// go to the lower training index; vote ties go to the label whose nearest
/// member ranks first.
pub fn knn_predict<'a>(distances: &[f64], train_labels: &'a [String], k: usize) -> &'a str {
    let mut order: Vec<usize> = (0..distances.len()).collect();
    order.sort_by(|&a, &b| distances[a].total_cmp(&distances[b]).then(a.cmp(&b)));
    let mut votes: Vec<(&str, usize)> = Vec::new();
    for &i in order.iter().take(k) {
        let label = train_labels[i].as_str();
        match votes.iter_mut().find(|(l, _)| *l == label) {
            Some(v) => v.1 += 1,
            None => votes.push((label, 1)),
        }
    }
    // `votes` is in order of first appearance, so the first maximum wins.
    votes
        .iter()
        .fold(("", 0), |best, &(l, c)| if c > best.1 { (l, c) } else { best })
        .0
}

/// Classifies every test document against the training set for each `k`.
/// `distances` is `test x train`.
pub fn knn_evaluate(
    distances: ArrayView2<'_, f64>,
    train_labels: &[String],
    test_labels: &[String],
    ks: &[usize],
    metric: &str,
) -> Result<KnnReport> {
    let (n_test, n_train) = distances.dim();
    if n_train == 0 || n_test == 0 {
        return Err(Error::EmptyCorpus);
    }
    if train_labels.len() != n_train || test_labels.len() != n_test {
        return Err(Error::Shape(format!(
            "{n_test}x{n_train} distances for {} test and {} train labels",
            test_labels.len(),
            train_labels.len()
        )));
    }
    if ks.is_empty() {
        return Err(Error::InvalidParameter("no neighborhood sizes given".into()));
    }
    if let Some(&k) = ks.iter().find(|&&k| k == 0 || k > n_train) {
        return Err(Error::InvalidParameter(format!("k = {k} outside 1..={n_train}")));
    }
    let mut wrong = vec![0usize; ks.len()];
    for (row, truth) in distances.outer_iter().zip(test_labels) {
        let row = row.to_vec();
        for (slot, &k) in ks.iter().enumerate() {
            if knn_predict(&row, train_labels, k) != truth {
                wrong[slot] += 1;
            }
        }
    }
    Ok(KnnReport {
        metric: metric.to_string(),
        ks: ks.to_vec(),
        errors: wrong.iter().map(|&w| w as f64 / n_test as f64).collect(),
        n_train,
        n_test,
    })
}

/// Best-k error of each method divided by the reference method's, averaged
/// over corpora. Each element of `corpora` maps method names to reports for
/// one corpus. A zero reference error yields 1 for a method that also has
/// zero error and infinity otherwise.
pub fn normalized_aggregate(
    corpora: &[BTreeMap<String, KnnReport>],
    reference: &str,
) -> Result<BTreeMap<String, f64>> {
    if corpora.is_empty() {
        return Err(Error::Missing("k-NN reports".into()));
    }
    let mut sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for reports in corpora {
        let base = reports
            .get(reference)
            .ok_or_else(|| Error::Missing(format!("reference method {reference:?}")))?
            .best()
            .1;
        for (name, report) in reports {
            let e = report.best().1;
            let ratio = if base > 0.0 {
                e / base
            } else if e == 0.0 {
                1.0
            } else {
                f64::INFINITY
            };
            let entry = sums.entry(name.clone()).or_insert((0.0, 0));
            entry.0 += ratio;
            entry.1 += 1;
        }
    }
    Ok(sums.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect())
}
