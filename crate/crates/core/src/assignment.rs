//! Exact minimum-cost linear assignment.
//!
//! Shortest augmenting path variant of the Hungarian method (Jonker-Volgenant
//! style): dual potentials are seeded by column and row reduction, tight edges
//! are matched greedily, augmenting row reduction places most of the rest,
//! and every remaining free row is inserted with one Dijkstra search over
//! reduced costs. Worst case O(n^3).

use crate::error::{Error, Result};

const NONE: usize = usize::MAX;

/// Dense square matrix of non-negative, finite costs (row-major).
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    n: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::Assignment(format!(
                "cost matrix must be square: {} entries for n = {n}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::Assignment(format!(
                "cost at ({}, {}) is {}; entries must be finite and non-negative",
                pos / n.max(1),
                pos % n.max(1),
                data[pos]
            )));
        }
        Ok(Self { n, data })
    }

    /// Builds from nested rows, rejecting ragged or non-square input.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::Assignment(format!(
                "cost matrix must be square: row of length {} in a {n}-row matrix",
                bad.len()
            )));
        }
        Self::new(n, rows.iter().flatten().copied().collect())
    }

    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.n + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.n..(row + 1) * self.n]
    }

    /// Total cost of an arbitrary row -> column permutation.
    pub fn permutation_cost(&self, perm: &[usize]) -> f64 {
        perm.iter().enumerate().map(|(i, &j)| self.get(i, j)).sum()
    }
}

/// A bijection rows -> columns with its total cost.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub permutation: Vec<usize>,
    pub total_cost: f64,
}

impl Assignment {
    /// Inverse permutation: column -> row.
    pub fn inverse(&self) -> Vec<usize> {
        let mut inv = vec![0; self.permutation.len()];
        for (i, &j) in self.permutation.iter().enumerate() {
            inv[j] = i;
        }
        inv
    }
}

/// Solves the linear assignment problem exactly.
pub fn solve_assignment(cost: &CostMatrix) -> Assignment {
    let n = cost.n;
    if n == 0 {
        return Assignment {
            permutation: Vec::new(),
            total_cost: 0.0,
        };
    }

    // Column reduction then row reduction keeps every reduced cost >= 0.
    let mut v = vec![f64::INFINITY; n];
    for i in 0..n {
        for (vj, &c) in v.iter_mut().zip(cost.row(i)) {
            if c < *vj {
                *vj = c;
            }
        }
    }
    let mut u = vec![0.0; n];
    for (i, ui) in u.iter_mut().enumerate() {
        *ui = cost
            .row(i)
            .iter()
            .zip(&v)
            .map(|(c, vj)| c - vj)
            .fold(f64::INFINITY, f64::min);
    }

    let mut row_to_col = vec![NONE; n];
    let mut col_to_row = vec![NONE; n];
    for i in 0..n {
        let row = cost.row(i);
        for j in 0..n {
            if col_to_row[j] == NONE && row[j] - u[i] - v[j] == 0.0 {
                row_to_col[i] = j;
                col_to_row[j] = i;
                break;
            }
        }
    }

    augmenting_row_reduction(cost, &mut v, &mut row_to_col, &mut col_to_row);
    for (i, ui) in u.iter_mut().enumerate() {
        let row = cost.row(i);
        *ui = match row_to_col[i] {
            NONE => row.iter().zip(&v).map(|(c, vj)| c - vj).fold(f64::INFINITY, f64::min),
            j => row[j] - v[j],
        };
    }

    let mut dist = vec![0.0; n];
    let mut pred = vec![0usize; n];
    let mut remaining: Vec<usize> = Vec::with_capacity(n);
    let mut visited_cols: Vec<usize> = Vec::with_capacity(n);

    for start in 0..n {
        if row_to_col[start] != NONE {
            continue;
        }
        augment(
            cost,
            start,
            &mut u,
            &mut v,
            &mut row_to_col,
            &mut col_to_row,
            &mut dist,
            &mut pred,
            &mut remaining,
            &mut visited_cols,
        );
    }

    let total_cost = cost.permutation_cost(&row_to_col);
    Assignment {
        permutation: row_to_col,
        total_cost,
    }
}

/// Two passes of Jonker-Volgenant augmenting row reduction over the free
/// rows. Works on column duals only; every assigned row keeps its column at
/// the row minimum of `c - v`.
fn augmenting_row_reduction(cost: &CostMatrix, v: &mut [f64], row_to_col: &mut [usize], col_to_row: &mut [usize]) {
    let n = cost.n;
    if n < 2 {
        return;
    }
    let mut free: Vec<usize> = (0..n).filter(|&i| row_to_col[i] == NONE).collect();
    for _ in 0..2 {
        let mut next = Vec::with_capacity(free.len());
        let mut k = 0;
        while k < free.len() {
            let i = free[k];
            k += 1;
            let row = cost.row(i);
            let (mut u1, mut j1) = (row[0] - v[0], 0);
            let (mut u2, mut j2) = (f64::INFINITY, NONE);
            for j in 1..n {
                let h = row[j] - v[j];
                if h < u2 {
                    if h >= u1 {
                        u2 = h;
                        j2 = j;
                    } else {
                        u2 = u1;
                        j2 = j1;
                        u1 = h;
                        j1 = j;
                    }
                }
            }
            let mut i0 = col_to_row[j1];
            if u1 < u2 {
                v[j1] -= u2 - u1;
            } else if i0 != NONE {
                j1 = j2;
                i0 = col_to_row[j2];
            }
            row_to_col[i] = j1;
            col_to_row[j1] = i;
            if i0 != NONE {
                row_to_col[i0] = NONE;
                if u1 < u2 {
                    k -= 1;
                    free[k] = i0;
                } else {
                    next.push(i0);
                }
            }
        }
        free = next;
    }
}

/// One Dijkstra search from a free row to the nearest free column in the
/// reduced-cost graph, followed by a dual update and path flip.
///
/// Among columns at equal distance a free column wins (it ends the search),
/// then the lowest index.
#[allow(clippy::too_many_arguments)]
fn augment(
    cost: &CostMatrix,
    start: usize,
    u: &mut [f64],
    v: &mut [f64],
    row_to_col: &mut [usize],
    col_to_row: &mut [usize],
    dist: &mut [f64],
    pred: &mut [usize],
    remaining: &mut Vec<usize>,
    visited_cols: &mut Vec<usize>,
) {
    let n = cost.n;
    dist.fill(f64::INFINITY);
    remaining.clear();
    remaining.extend(0..n);
    visited_cols.clear();

    let mut row = start;
    let mut frontier = 0.0;
    let sink = loop {
        let costs = cost.row(row);
        let base = frontier - u[row];
        let mut lowest = f64::INFINITY;
        let mut lowest_free = false;
        let mut lowest_col = NONE;
        let mut lowest_pos = NONE;
        for (pos, &j) in remaining.iter().enumerate() {
            let candidate = base + costs[j] - v[j];
            if candidate < dist[j] {
                dist[j] = candidate;
                pred[j] = row;
            }
            let d = dist[j];
            if d <= lowest {
                let free = col_to_row[j] == NONE;
                if d < lowest || (free && !lowest_free) || (free == lowest_free && j < lowest_col) {
                    lowest = d;
                    lowest_free = free;
                    lowest_col = j;
                    lowest_pos = pos;
                }
            }
        }
        debug_assert!(lowest_col != NONE, "reduced costs must stay finite");
        frontier = lowest;
        remaining.swap_remove(lowest_pos);
        visited_cols.push(lowest_col);
        if lowest_free {
            break lowest_col;
        }
        // The matched edge into `lowest_col` is tight: its row sits at `frontier`.
        row = col_to_row[lowest_col];
    };

    // Dual update over scanned columns keeps matched edges tight.
    for &j in visited_cols.iter() {
        let shift = frontier - dist[j];
        v[j] -= shift;
        let i = col_to_row[j];
        if i != NONE {
            u[i] += shift;
        }
    }
    u[start] += frontier;

    let mut j = sink;
    loop {
        let i = pred[j];
        col_to_row[j] = i;
        let prev = row_to_col[i];
        row_to_col[i] = j;
        if i == start {
            break;
        }
        j = prev;
    }
}
