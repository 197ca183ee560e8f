use ndarray::ArrayView2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::kv_lines;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MantelResult {
    pub r: f64,
    pub p: f64,
    pub permutations: usize,
}

impl MantelResult {
    pub fn to_kv(&self) -> String {
        kv_lines(&[
            ("mantel_r", self.r.to_string()),
            ("mantel_p", self.p.to_string()),
            ("permutations", self.permutations.to_string()),
        ])
    }
}

fn check_square(a: &ArrayView2<'_, f64>, b: &ArrayView2<'_, f64>) -> Result<usize> {
    let n = a.nrows();
    if a.ncols() != n || b.dim() != (n, n) {
        return Err(Error::Shape(format!(
            "matrices {}x{} and {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    Ok(n)
}

fn centered_upper(m: &ArrayView2<'_, f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut v: Vec<f64> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).map(|(i, j)| m[[i, j]]).collect();
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
    v
}

fn correlation(x: &[f64], y: &[f64]) -> f64 {
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += a * b;
        sxx += a * a;
        syy += b * b;
    }
    (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)
}

/// Pearson correlation of the upper triangles with a two-sided permutation
/// p-value. Each permutation reorders rows and columns of `b` jointly; the
/// identity counts as one of the `permutations + 1` arrangements.
pub fn mantel(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>, permutations: usize, seed: u64) -> Result<MantelResult> {
    let n = check_square(&a, &b)?;
    if permutations == 0 {
        return Err(Error::InvalidParameter("permutations must be at least 1".into()));
    }
    if n < 3 {
        return Err(Error::InvalidParameter("Mantel test needs at least 3 documents".into()));
    }
    let x = centered_upper(&a);
    let y = centered_upper(&b);
    if x.iter().all(|&v| v == 0.0) || y.iter().all(|&v| v == 0.0) {
        return Err(Error::ZeroVariance);
    }
    let r = correlation(&x, &y);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perm: Vec<usize> = (0..n).collect();
    let mut yp = vec![0.0; y.len()];
    let mut hits = 1usize;
    for _ in 0..permutations {
        perm.shuffle(&mut rng);
        let mut k = 0;
        for i in 0..n {
            for j in i + 1..n {
                yp[k] = b[[perm[i], perm[j]]];
                k += 1;
            }
        }
        let mean = yp.iter().sum::<f64>() / yp.len() as f64;
        yp.iter_mut().for_each(|v| *v -= mean);
        if correlation(&x, &yp).abs() >= r.abs() {
            hits += 1;
        }
    }
    Ok(MantelResult {
        r,
        p: hits as f64 / (permutations + 1) as f64,
        permutations,
    })
}

/// Frobenius norm of `a - b` over all entries.
pub fn frobenius_diff(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::Shape(format!("matrices {:?} and {:?}", a.dim(), b.dim())));
    }
    Ok(a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
}
