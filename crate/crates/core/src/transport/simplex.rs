//! Transportation-problem network simplex on a dense bipartite instance.
//!
//! The basis is a spanning tree over `n + m` nodes (rows `0..n`, columns
//! `n..n + m`) with exactly `n + m - 1` basic cells. Entering cells are found
//! by block pricing (most negative reduced cost within a block, lowest index
//! on ties); the leaving cell is the blocking cell of smallest linear index.
//! Long runs of degenerate pivots switch to Bland's rule until progress is
//! made, which rules out cycling.

use ndarray::ArrayView2;

use crate::error::{Error, Result};

const NONE: usize = usize::MAX;

pub(crate) struct Basis {
    pub cells: Vec<(usize, usize)>,
    pub flow: Vec<f64>,
}

struct Tree<'a> {
    n: usize,
    m: usize,
    cost: ArrayView2<'a, f64>,
    cells: Vec<(usize, usize)>,
    flow: Vec<f64>,
    adj: Vec<Vec<usize>>,
    u: Vec<f64>,
    v: Vec<f64>,
    // scratch
    parent: Vec<usize>,
    stack: Vec<usize>,
}

impl<'a> Tree<'a> {
    /// Northwest-corner start. When a row and a column are exhausted together
    /// only the row advances, leaving a zero-flow basic cell so the basis
    /// stays a spanning tree.
    fn northwest(supply: &[f64], demand: &[f64], cost: ArrayView2<'a, f64>) -> Self {
        let (n, m) = (supply.len(), demand.len());
        let mut a = supply.to_vec();
        let mut b = demand.to_vec();
        let mut cells = Vec::with_capacity(n + m - 1);
        let mut flow = Vec::with_capacity(n + m - 1);
        let (mut i, mut j) = (0, 0);
        loop {
            let f = if i == n - 1 && j == m - 1 {
                // Last cell absorbs rounding left over by normalization.
                a[i].min(b[j]).max(0.0)
            } else {
                a[i].min(b[j])
            };
            cells.push((i, j));
            flow.push(f);
            a[i] -= f;
            b[j] -= f;
            if i == n - 1 && j == m - 1 {
                break;
            } else if i == n - 1 {
                j += 1;
            } else if j == m - 1 || a[i] <= b[j] {
                i += 1;
            } else {
                j += 1;
            }
        }
        debug_assert_eq!(cells.len(), n + m - 1);
        let mut adj = vec![Vec::new(); n + m];
        for (s, &(r, c)) in cells.iter().enumerate() {
            adj[r].push(s);
            adj[n + c].push(s);
        }
        Tree {
            n,
            m,
            cost,
            cells,
            flow,
            adj,
            u: vec![0.0; n],
            v: vec![0.0; m],
            parent: vec![NONE; n + m],
            stack: Vec::with_capacity(n + m),
        }
    }

    #[inline]
    fn other_end(&self, node: usize, slot: usize) -> usize {
        let (r, c) = self.cells[slot];
        if node < self.n {
            self.n + c
        } else {
            r
        }
    }

    /// Potentials with `u[0] = 0` and `u[i] + v[j] = C[i, j]` on basic cells.
    fn compute_duals(&mut self) {
        let n = self.n;
        self.parent.fill(NONE);
        self.stack.clear();
        self.u[0] = 0.0;
        self.parent[0] = 0;
        self.stack.push(0);
        while let Some(x) = self.stack.pop() {
            for k in 0..self.adj[x].len() {
                let slot = self.adj[x][k];
                let y = self.other_end(x, slot);
                if self.parent[y] != NONE {
                    continue;
                }
                self.parent[y] = slot;
                let (r, c) = self.cells[slot];
                let cij = self.cost[[r, c]];
                if y >= n {
                    self.v[c] = cij - self.u[r];
                } else {
                    self.u[r] = cij - self.v[c];
                }
                self.stack.push(y);
            }
        }
    }

    /// Tree path from row node `i` to column node `n + j`, as basis slots
    /// ordered from the column end.
    fn path(&mut self, i: usize, j: usize, out: &mut Vec<usize>) {
        let target = self.n + j;
        self.parent.fill(NONE);
        self.stack.clear();
        self.parent[i] = i;
        self.stack.push(i);
        'search: while let Some(x) = self.stack.pop() {
            for k in 0..self.adj[x].len() {
                let slot = self.adj[x][k];
                let y = self.other_end(x, slot);
                if self.parent[y] != NONE {
                    continue;
                }
                self.parent[y] = slot;
                if y == target {
                    break 'search;
                }
                self.stack.push(y);
            }
        }
        out.clear();
        let mut node = target;
        while node != i {
            let slot = self.parent[node];
            out.push(slot);
            node = self.other_end(node, slot);
        }
    }

    fn remove_adj(&mut self, node: usize, slot: usize) {
        let list = &mut self.adj[node];
        let pos = list.iter().position(|&s| s == slot).expect("slot in adjacency");
        list.swap_remove(pos);
    }
}

pub(crate) fn solve(supply: &[f64], demand: &[f64], cost: ArrayView2<'_, f64>) -> Result<Basis> {
    let (n, m) = (supply.len(), demand.len());
    let mut tree = Tree::northwest(supply, demand, cost);
    if n == 1 || m == 1 {
        return Ok(Basis {
            cells: tree.cells,
            flow: tree.flow,
        });
    }

    let cmax = cost.iter().fold(0.0f64, |acc, &c| acc.max(c.abs()));
    if cmax == 0.0 {
        return Ok(Basis {
            cells: tree.cells,
            flow: tree.flow,
        });
    }
    let tol = 1e-12 * cmax;
    let total = n * m;
    let block = ((total as f64).sqrt() as usize).max(10).min(total);
    let limit = 100 * total + 10_000;

    let mut cursor = 0usize;
    let mut degenerate_run = 0usize;
    let mut path = Vec::with_capacity(n + m);

    for _ in 0..limit {
        tree.compute_duals();
        let bland = degenerate_run > n + m;

        let entering = if bland {
            first_negative(&tree, tol)
        } else {
            block_search(&tree, tol, block, &mut cursor)
        };
        let Some((ei, ej)) = entering else {
            return Ok(Basis {
                cells: tree.cells,
                flow: tree.flow,
            });
        };

        tree.path(ei, ej, &mut path);
        // Slots at even positions (counting from the column end) lose flow.
        let mut leave = NONE;
        let mut theta = f64::INFINITY;
        let mut leave_key = usize::MAX;
        for &slot in path.iter().step_by(2) {
            let f = tree.flow[slot];
            let (r, c) = tree.cells[slot];
            let key = r * m + c;
            if f < theta || (f == theta && key < leave_key) {
                theta = f;
                leave = slot;
                leave_key = key;
            }
        }
        debug_assert!(leave != NONE);

        if theta > 0.0 {
            for (k, &slot) in path.iter().enumerate() {
                if k % 2 == 0 {
                    tree.flow[slot] -= theta;
                } else {
                    tree.flow[slot] += theta;
                }
            }
            degenerate_run = 0;
        } else {
            degenerate_run += 1;
        }

        let (lr, lc) = tree.cells[leave];
        tree.remove_adj(lr, leave);
        tree.remove_adj(n + lc, leave);
        tree.cells[leave] = (ei, ej);
        tree.flow[leave] = theta;
        tree.adj[ei].push(leave);
        tree.adj[n + ej].push(leave);
    }
    Err(Error::IterationLimit(limit))
}

fn first_negative(tree: &Tree<'_>, tol: f64) -> Option<(usize, usize)> {
    for i in 0..tree.n {
        let ui = tree.u[i];
        let row = tree.cost.row(i);
        for j in 0..tree.m {
            if row[j] - ui - tree.v[j] < -tol {
                return Some((i, j));
            }
        }
    }
    None
}

/// Scans cells in blocks starting at `cursor`, returning the most negative
/// reduced cost of the first block that has one.
fn block_search(tree: &Tree<'_>, tol: f64, block: usize, cursor: &mut usize) -> Option<(usize, usize)> {
    let (n, m) = (tree.n, tree.m);
    let total = n * m;
    let mut i = *cursor / m;
    let mut j = *cursor % m;
    let mut best = -tol;
    let mut best_key = usize::MAX;
    let mut best_cell = None;
    let mut in_block = 0;
    let mut row = tree.cost.row(i);
    let mut ui = tree.u[i];
    for _ in 0..total {
        let rc = row[j] - ui - tree.v[j];
        let key = i * m + j;
        if rc < best || (rc == best && best_cell.is_some() && key < best_key) {
            best = rc;
            best_key = key;
            best_cell = Some((i, j));
        }
        j += 1;
        if j == m {
            j = 0;
            i += 1;
            if i == n {
                i = 0;
            }
            row = tree.cost.row(i);
            ui = tree.u[i];
        }
        in_block += 1;
        if in_block == block {
            if best_cell.is_some() {
                break;
            }
            in_block = 0;
        }
    }
    *cursor = i * m + j;
    best_cell
}
