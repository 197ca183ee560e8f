//! Exhaustive reference solver for tiny instances. Test oracle only: it
//! shares no code with the simplex.

use ndarray::ArrayView2;

use crate::error::{Error, Result};

const MAX_PERMUTATION_SIZE: usize = 6;
const MAX_VERTEX_VARIABLES: usize = 12;

/// Exact optimal transport cost by enumeration.
///
/// Equal-size uniform marginals (`n <= 6`) are solved over all `n!`
/// assignments, which are the vertices of the Birkhoff polytope. Anything
/// else with `n * m <= 12` enumerates every basic solution: each spanning
/// tree of the complete bipartite graph determines one candidate plan.
pub fn brute_force_reference(p: &[f64], q: &[f64], cost: ArrayView2<'_, f64>) -> Result<f64> {
    let (n, m) = (p.len(), q.len());
    if cost.dim() != (n, m) || n == 0 || m == 0 {
        return Err(Error::Shape("oracle marginals do not match cost".into()));
    }
    let sp: f64 = p.iter().sum();
    let sq: f64 = q.iter().sum();
    let p: Vec<f64> = p.iter().map(|x| x / sp).collect();
    let q: Vec<f64> = q.iter().map(|x| x / sq).collect();

    let uniform = |v: &[f64]| v.iter().all(|&x| (x - 1.0 / v.len() as f64).abs() <= 1e-12);
    if n == m && n <= MAX_PERMUTATION_SIZE && uniform(&p) && uniform(&q) {
        return Ok(best_assignment(&cost) / n as f64);
    }
    if n * m <= MAX_VERTEX_VARIABLES {
        return Ok(best_vertex(&p, &q, &cost));
    }
    Err(Error::OracleScale)
}

fn best_assignment(cost: &ArrayView2<'_, f64>) -> f64 {
    fn recurse(cost: &ArrayView2<'_, f64>, row: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64) {
        let n = used.len();
        if row == n {
            *best = best.min(acc);
            return;
        }
        for j in 0..n {
            if !used[j] {
                used[j] = true;
                recurse(cost, row + 1, used, acc + cost[[row, j]], best);
                used[j] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    recurse(cost, 0, &mut vec![false; cost.nrows()], 0.0, &mut best);
    best
}

fn best_vertex(p: &[f64], q: &[f64], cost: &ArrayView2<'_, f64>) -> f64 {
    let (n, m) = (p.len(), q.len());
    let cells: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..m).map(move |j| (i, j))).collect();
    let k = n + m - 1;
    let mut best = f64::INFINITY;
    let mut chosen = Vec::with_capacity(k);
    for_each_subset(cells.len(), k, 0, &mut chosen, &mut |subset| {
        let edges: Vec<(usize, usize)> = subset.iter().map(|&s| cells[s]).collect();
        if let Some(flows) = tree_flows(p, q, &edges) {
            if flows.iter().all(|&f| f >= -1e-12) {
                let c: f64 = edges.iter().zip(&flows).map(|(&(i, j), f)| cost[[i, j]] * f).sum();
                best = best.min(c);
            }
        }
    });
    best
}

fn for_each_subset<F: FnMut(&[usize])>(total: usize, k: usize, start: usize, chosen: &mut Vec<usize>, f: &mut F) {
    if chosen.len() == k {
        f(chosen);
        return;
    }
    let needed = k - chosen.len();
    for s in start..=total - needed {
        chosen.push(s);
        for_each_subset(total, k, s + 1, chosen, f);
        chosen.pop();
    }
}

/// Flows on a spanning tree of the bipartite graph, found by peeling leaves.
/// `None` if the edge set is not a spanning tree.
fn tree_flows(p: &[f64], q: &[f64], edges: &[(usize, usize)]) -> Option<Vec<f64>> {
    let (n, m) = (p.len(), q.len());
    let mut residual: Vec<f64> = p.iter().chain(q).copied().collect();
    let mut degree = vec![0usize; n + m];
    for &(i, j) in edges {
        degree[i] += 1;
        degree[n + j] += 1;
    }
    let mut alive = vec![true; edges.len()];
    let mut flows = vec![0.0; edges.len()];
    for _ in 0..edges.len() {
        let (e, leaf) = edges.iter().enumerate().find_map(|(e, &(i, j))| {
            if !alive[e] {
                None
            } else if degree[i] == 1 {
                Some((e, i))
            } else if degree[n + j] == 1 {
                Some((e, n + j))
            } else {
                None
            }
        })?;
        let (i, j) = edges[e];
        let other = if leaf == i { n + j } else { i };
        let f = residual[leaf];
        flows[e] = f;
        residual[leaf] = 0.0;
        residual[other] -= f;
        alive[e] = false;
        degree[i] -= 1;
        degree[n + j] -= 1;
    }
    // A spanning tree leaves every node balanced and touched.
    let balanced = residual.iter().all(|r| r.abs() <= 1e-9);
    let covered = (0..n + m).all(|v| {
        edges.iter().any(|&(i, j)| i == v || n + j == v)
    });
    (balanced && covered).then_some(flows)
}
