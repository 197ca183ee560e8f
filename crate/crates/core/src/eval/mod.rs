//! Evaluation: k-NN classification, matrix comparison, bound verification
//! and throughput measurement.

mod bounds;
mod knn;
mod mantel;
mod throughput;

pub use bounds::{check_bounds, BoundChecker, BoundReport, BoundSummary};
pub use knn::{knn_evaluate, knn_predict, normalized_aggregate, KnnReport};
pub use mantel::{frobenius_diff, mantel, MantelResult};
pub use throughput::{benchmark_throughput, machine_note, sample_pairs, ThroughputReport};

/// Formats `key=value` lines.
pub(crate) fn kv_lines(pairs: &[(&str, String)]) -> String {
    let mut out = String::new();
    for (k, v) in pairs {
        out.push_str(k);
        out.push('=');
        out.push_str(v);
        out.push('\n');
    }
    out
}
