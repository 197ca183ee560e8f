use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::distances::PreparedMetric;
use crate::error::{Error, Result};

use super::kv_lines;

#[derive(Debug, Clone, PartialEq)]
pub struct ThroughputReport {
    pub metric: String,
    pub pairs: usize,
    pub warmup: usize,
    pub seconds: f64,
    pub pairs_per_second: f64,
    pub machine: String,
}

impl ThroughputReport {
    pub fn to_kv(&self) -> String {
        kv_lines(&[
            ("metric", self.metric.clone()),
            ("pairs", self.pairs.to_string()),
            ("warmup", self.warmup.to_string()),
            ("seconds", self.seconds.to_string()),
            ("pairs_per_second", self.pairs_per_second.to_string()),
            ("workers", "1".into()),
            ("machine", self.machine.clone()),
        ])
    }

    pub const CSV_HEADER: &'static str = "metric,pairs,seconds,pairs_per_second";

    pub fn csv_row(&self) -> String {
        format!("{},{},{},{}", self.metric, self.pairs, self.seconds, self.pairs_per_second)
    }
}

/// Operating system, architecture and available cores.
pub fn machine_note() -> String {
    let cores = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    format!("{} {} {} cores", std::env::consts::OS, std::env::consts::ARCH, cores)
}

/// `count` ordered pairs of distinct indices below `n`, drawn uniformly
/// with a seeded generator.
pub fn sample_pairs(n: usize, count: usize, seed: u64) -> Vec<(usize, usize)> {
    if n < 2 {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let a = rng.random_range(0..n);
            (a, (a + rng.random_range(1..n)) % n)
        })
        .collect()
}

/// Times `budget` distinct-document pairs drawn uniformly with a seeded
/// generator, after `warmup` untimed pairs. Runs on the calling thread only.
pub fn benchmark_throughput(
    metric: &PreparedMetric<'_>,
    budget: usize,
    warmup: usize,
    seed: u64,
) -> Result<ThroughputReport> {
    let n = metric.len();
    if n < 2 {
        return Err(Error::InvalidParameter("benchmarking needs at least 2 documents".into()));
    }
    if budget == 0 {
        return Err(Error::InvalidParameter("pair budget must be at least 1".into()));
    }
    let sampled = sample_pairs(n, warmup + budget, seed);
    let (warm, pairs) = sampled.split_at(warmup);
    for &(a, b) in warm {
        metric.distance(a, b)?;
    }
    let start = Instant::now();
    let mut sink = 0.0;
    for &(a, b) in pairs {
        sink += metric.distance(a, b)?;
    }
    let seconds = start.elapsed().as_secs_f64().max(1e-9);
    std::hint::black_box(sink);
    Ok(ThroughputReport {
        metric: metric.metric().to_string(),
        pairs: budget,
        warmup,
        seconds,
        pairs_per_second: budget as f64 / seconds,
        machine: machine_note(),
    })
}
