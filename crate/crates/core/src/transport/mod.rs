//! Exact discrete optimal transport, its one-marginal relaxations, and the
//! Hausdorff distance between finite site sets.
//!
//! All entry points take masses as slices and costs as `n x m` views. Masses
//! must be nonnegative with totals agreeing to within `1e-6`; both sides are
//! renormalized to sum to one before solving. Zero-mass sites are removed
//! before the simplex runs and come back as zero rows/columns of the plan.

mod reference;
mod simplex;

use std::sync::atomic::{AtomicU64, Ordering};

use ndarray::{Array2, ArrayView2, Axis};

use crate::embeddings::GroundPower;
use crate::error::{Error, Result};

pub use reference::brute_force_reference;

/// Largest allowed difference between the two marginal totals.
pub const BALANCE_TOLERANCE: f64 = 1e-6;

/// A probability vector over `n` sites.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram(Vec<f64>);

impl Histogram {
    /// Accepts nonnegative finite masses summing to one within `1e-6` and
    /// renormalizes them.
    pub fn new(mass: Vec<f64>) -> Result<Self> {
        let total = check_masses(&mass, "histogram")?;
        if (total - 1.0).abs() > BALANCE_TOLERANCE {
            return Err(Error::InvalidHistogram(format!("total mass {total}")));
        }
        Ok(Histogram(mass.into_iter().map(|x| x / total).collect()))
    }

    /// Normalizes arbitrary nonnegative weights.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        let total = check_masses(&weights, "histogram")?;
        Ok(Histogram(weights.into_iter().map(|x| x / total).collect()))
    }

    pub fn uniform(n: usize) -> Self {
        Histogram(vec![1.0 / n as f64; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Indices carrying positive mass.
    pub fn support(&self) -> Vec<usize> {
        support(&self.0)
    }
}

impl AsRef<[f64]> for Histogram {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransportResult {
    pub cost: f64,
    pub plan: Array2<f64>,
}

impl TransportResult {
    /// Largest absolute deviation of the plan's row and column sums from `p`
    /// and `q`.
    pub fn marginal_residual(&self, p: &[f64], q: &[f64]) -> f64 {
        marginal_residual(&self.plan, p, q)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelaxedResult {
    /// Optimum with only the source marginal enforced.
    pub cost_keep_p: f64,
    /// Optimum with only the target marginal enforced.
    pub cost_keep_q: f64,
    pub value: f64,
}

static PLANS_SOLVED: AtomicU64 = AtomicU64::new(0);
static WORST_RESIDUAL_BITS: AtomicU64 = AtomicU64::new(0);

/// Process-wide record of every plan returned by [`solve_exact`]: the number
/// of plans and the worst marginal-constraint residual seen.
pub fn marginal_audit() -> (u64, f64) {
    (
        PLANS_SOLVED.load(Ordering::Relaxed),
        f64::from_bits(WORST_RESIDUAL_BITS.load(Ordering::Relaxed)),
    )
}

fn record_plan(residual: f64) {
    PLANS_SOLVED.fetch_add(1, Ordering::Relaxed);
    // Nonnegative floats order the same way as their bit patterns.
    let bits = if residual.is_nan() { f64::INFINITY } else { residual.max(0.0) }.to_bits();
    WORST_RESIDUAL_BITS.fetch_max(bits, Ordering::Relaxed);
}

fn check_masses(mass: &[f64], what: &str) -> Result<f64> {
    if mass.is_empty() {
        return Err(Error::InvalidHistogram(format!("empty {what}")));
    }
    if let Some(bad) = mass.iter().find(|x| !x.is_finite() || **x < 0.0) {
        return Err(Error::InvalidHistogram(format!("{what} has entry {bad}")));
    }
    let total: f64 = mass.iter().sum();
    if total <= 0.0 {
        return Err(Error::InvalidHistogram(format!("{what} has zero total mass")));
    }
    Ok(total)
}

fn support(mass: &[f64]) -> Vec<usize> {
    mass.iter()
        .enumerate()
        .filter(|(_, &x)| x > 0.0)
        .map(|(i, _)| i)
        .collect()
}

/// Validates an instance and returns renormalized copies of both marginals.
fn prepare(p: &[f64], q: &[f64], cost: &ArrayView2<'_, f64>) -> Result<(Vec<f64>, Vec<f64>)> {
    if cost.nrows() != p.len() || cost.ncols() != q.len() {
        return Err(Error::Shape(format!(
            "cost matrix {}x{} for marginals of length {} and {}",
            cost.nrows(),
            cost.ncols(),
            p.len(),
            q.len()
        )));
    }
    let sp = check_masses(p, "source marginal")?;
    let sq = check_masses(q, "target marginal")?;
    if (sp - sq).abs() > BALANCE_TOLERANCE {
        return Err(Error::Unbalanced { left: sp, right: sq });
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidParameter("non-finite cost".into()));
    }
    Ok((
        p.iter().map(|x| x / sp).collect(),
        q.iter().map(|x| x / sq).collect(),
    ))
}

fn marginal_residual(plan: &Array2<f64>, p: &[f64], q: &[f64]) -> f64 {
    let rows = plan.sum_axis(Axis(1));
    let cols = plan.sum_axis(Axis(0));
    let r = rows.iter().zip(p).map(|(a, b)| (a - b).abs());
    let c = cols.iter().zip(q).map(|(a, b)| (a - b).abs());
    r.chain(c).fold(0.0, f64::max)
}

/// Solves `min <C, plan>` over couplings of `p` and `q`.
pub fn solve_exact(p: &[f64], q: &[f64], cost: ArrayView2<'_, f64>) -> Result<TransportResult> {
    let (p, q) = prepare(p, q, &cost)?;
    let rows = support(&p);
    let cols = support(&q);
    let compact;
    let view = if rows.len() == p.len() && cols.len() == q.len() {
        cost
    } else {
        compact = cost.select(Axis(0), &rows).select(Axis(1), &cols);
        compact.view()
    };
    let a: Vec<f64> = rows.iter().map(|&i| p[i]).collect();
    let b: Vec<f64> = cols.iter().map(|&j| q[j]).collect();

    let basis = simplex::solve(&a, &b, view)?;

    let mut plan = Array2::zeros((p.len(), q.len()));
    let mut total = 0.0;
    for (&(r, c), &f) in basis.cells.iter().zip(&basis.flow) {
        if f != 0.0 {
            plan[[rows[r], cols[c]]] += f;
            total += f * view[[r, c]];
        }
    }
    record_plan(marginal_residual(&plan, &p, &q));
    Ok(TransportResult { cost: total, plan })
}

/// Wasserstein distance of order `power` for the base distances `dist`:
/// the optimal cost under `dist^power`, raised to `1 / power`.
pub fn wasserstein(p: &[f64], q: &[f64], dist: ArrayView2<'_, f64>, power: GroundPower) -> Result<f64> {
    let result = match power {
        GroundPower::One => solve_exact(p, q, dist)?,
        GroundPower::Two => {
            let squared = dist.mapv(|d| d * d);
            solve_exact(p, q, squared.view())?
        }
    };
    Ok(power.root(result.cost))
}

/// Closed-form optima when one marginal constraint is dropped: each unit of
/// mass moves to the nearest supported site on the other side.
pub fn relaxed_cost(p: &[f64], q: &[f64], cost: ArrayView2<'_, f64>) -> Result<RelaxedResult> {
    let (p, q) = prepare(p, q, &cost)?;
    let mut row_min = vec![f64::INFINITY; p.len()];
    let mut col_min = vec![f64::INFINITY; q.len()];
    for (i, row) in cost.outer_iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            if q[j] > 0.0 && c < row_min[i] {
                row_min[i] = c;
            }
            if p[i] > 0.0 && c < col_min[j] {
                col_min[j] = c;
            }
        }
    }
    let keep = |mass: &[f64], mins: &[f64]| -> f64 {
        mass.iter()
            .zip(mins)
            .filter(|(&m, _)| m > 0.0)
            .map(|(m, c)| m * c)
            .sum()
    };
    let cost_keep_p = keep(&p, &row_min);
    let cost_keep_q = keep(&q, &col_min);
    Ok(RelaxedResult {
        cost_keep_p,
        cost_keep_q,
        value: cost_keep_p.max(cost_keep_q),
    })
}

/// Hausdorff distance between site sets `X` (rows of `dist`) and `Y`
/// (columns).
pub fn hausdorff(dist: ArrayView2<'_, f64>) -> Result<f64> {
    let (n, m) = dist.dim();
    if n == 0 || m == 0 {
        return Err(Error::EmptySet);
    }
    let mut col_min = vec![f64::INFINITY; m];
    let mut forward = 0.0f64;
    for row in dist.outer_iter() {
        let mut row_min = f64::INFINITY;
        for (j, &d) in row.iter().enumerate() {
            row_min = row_min.min(d);
            col_min[j] = col_min[j].min(d);
        }
        forward = forward.max(row_min);
    }
    let backward = col_min.into_iter().fold(0.0f64, f64::max);
    Ok(forward.max(backward))
}
