//! Minimum-cost rectangular assignment.
//!
//! [`solve`] runs the shortest-augmenting-path Hungarian method on the
//! rectangular matrix directly (transposing so rows ≤ cols), then picks the
//! lexicographically smallest optimal pair set by walking the subgraph of
//! zero-reduced-cost edges left behind by the optimal dual. Every optimal
//! assignment lives in that subgraph, so the tie-break never gives up cost.
//!
//! [`brute_force_solve`] enumerates injections and is kept as a reference.

use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Dense row-major cost matrix with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} values for a {rows}x{cols} matrix",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Input(format!(
                "non-finite cost {} at ({}, {})",
                values[pos],
                pos / cols.max(1),
                pos % cols.max(1)
            )));
        }
        Ok(CostMatrix { rows, cols, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Dimension("ragged cost matrix".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    pub fn transpose(&self) -> CostMatrix {
        let mut values = Vec::with_capacity(self.values.len());
        for c in 0..self.cols {
            for r in 0..self.rows {
                values.push(self.get(r, c));
            }
        }
        CostMatrix { rows: self.cols, cols: self.rows, values }
    }

    fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Matched `(row, col)` pairs sorted by row, and their summed cost.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub pairs: Vec<(usize, usize)>,
    pub total_cost: f64,
}

impl Assignment {
    fn from_pairs(m: &CostMatrix, mut pairs: Vec<(usize, usize)>) -> Self {
        pairs.sort_unstable();
        let total_cost = pairs.iter().map(|&(r, c)| m.get(r, c)).sum();
        Assignment { pairs, total_cost }
    }

    pub fn col_for_row(&self, row: usize) -> Option<usize> {
        self.pairs.iter().find(|p| p.0 == row).map(|p| p.1)
    }

    pub fn row_for_col(&self, col: usize) -> Option<usize> {
        self.pairs.iter().find(|p| p.1 == col).map(|p| p.0)
    }
}

/// Potentials and row→col matching for a matrix with rows ≤ cols.
struct Dual {
    u: Vec<f64>,
    v: Vec<f64>,
    row_to_col: Vec<usize>,
}

fn hungarian(m: &CostMatrix) -> Dual {
    let (n, k) = (m.rows, m.cols);
    debug_assert!(n <= k);
    // 1-based with a virtual column 0, as in the classic potentials formulation
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; k + 1];
    let mut p = vec![0usize; k + 1];
    let mut way = vec![0usize; k + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; k + 1];
        let mut used = vec![false; k + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=k {
                if used[j] {
                    continue;
                }
                let cur = m.get(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=k {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = vec![usize::MAX; n];
    for j in 1..=k {
        if p[j] != 0 {
            row_to_col[p[j] - 1] = j - 1;
        }
    }
    Dual { u: u[1..].to_vec(), v: v[1..].to_vec(), row_to_col }
}

/// Square view of the problem padded with zero-cost dummy rows or columns,
/// carrying an optimal dual and a perfect matching on the tight edges.
struct TightGraph<'a> {
    m: &'a CostMatrix,
    size: usize,
    row_dual: Vec<f64>,
    col_dual: Vec<f64>,
    tol: f64,
    row_to_col: Vec<usize>,
    col_to_row: Vec<usize>,
}

impl<'a> TightGraph<'a> {
    fn new(m: &'a CostMatrix) -> Self {
        let size = m.rows.max(m.cols);
        let mut row_dual = vec![0.0; size];
        let mut col_dual = vec![0.0; size];
        let mut row_to_col = vec![usize::MAX; size];
        let mut col_to_row = vec![usize::MAX; size];

        if m.rows <= m.cols {
            let d = hungarian(m);
            row_dual[..m.rows].copy_from_slice(&d.u);
            col_dual[..m.cols].copy_from_slice(&d.v);
            for (r, &c) in d.row_to_col.iter().enumerate() {
                row_to_col[r] = c;
                col_to_row[c] = r;
            }
        } else {
            let d = hungarian(&m.transpose());
            col_dual[..m.cols].copy_from_slice(&d.u);
            row_dual[..m.rows].copy_from_slice(&d.v);
            for (c, &r) in d.row_to_col.iter().enumerate() {
                row_to_col[r] = c;
                col_to_row[c] = r;
            }
        }
        // Unmatched real rows/cols carry a zero dual, so pairing them with the
        // zero-cost padding is tight.
        let free: Vec<usize> = (0..size).filter(|&c| col_to_row[c] == usize::MAX).collect();
        let mut free_cols = free.into_iter();
        for r in 0..size {
            if row_to_col[r] == usize::MAX {
                let c = free_cols.next().expect("square padding");
                row_to_col[r] = c;
                col_to_row[c] = r;
            }
        }
        let tol = 1e-10 * (1.0 + m.max_abs()) * size as f64;
        TightGraph { m, size, row_dual, col_dual, tol, row_to_col, col_to_row }
    }

    fn cost(&self, r: usize, c: usize) -> f64 {
        if r < self.m.rows && c < self.m.cols {
            self.m.get(r, c)
        } else {
            0.0
        }
    }

    fn tight(&self, r: usize, c: usize) -> bool {
        (self.cost(r, c) - self.row_dual[r] - self.col_dual[c]).abs() <= self.tol
    }

    /// Moves `row` onto `col` by re-routing the current owner of `col` along
    /// an alternating path of tight edges that ends at `row`'s old column.
    fn reroute(&mut self, row: usize, col: usize, row_fixed: &[bool], col_fixed: &[bool]) -> bool {
        let target = self.row_to_col[row];
        let start = self.col_to_row[col];
        let mut parent_col = vec![usize::MAX; self.size];
        let mut seen_col = vec![false; self.size];
        let mut queue = VecDeque::from([start]);
        let mut seen_row = vec![false; self.size];
        seen_row[start] = true;
        let mut found = None;
        'bfs: while let Some(r) = queue.pop_front() {
            for c in 0..self.size {
                if c == col || col_fixed[c] || seen_col[c] || !self.tight(r, c) {
                    continue;
                }
                seen_col[c] = true;
                parent_col[c] = r;
                if c == target {
                    found = Some(c);
                    break 'bfs;
                }
                let next = self.col_to_row[c];
                if !seen_row[next] && !row_fixed[next] && next != row {
                    seen_row[next] = true;
                    queue.push_back(next);
                }
            }
        }
        let Some(mut c) = found else { return false };
        // Walk back from the target column: each row on the path takes the
        // column that led to its successor.
        loop {
            let r = parent_col[c];
            let prev = self.row_to_col[r];
            self.row_to_col[r] = c;
            self.col_to_row[c] = r;
            if r == start {
                break;
            }
            c = prev;
        }
        self.row_to_col[row] = col;
        self.col_to_row[col] = row;
        true
    }

    fn lexicographic_min(mut self) -> Vec<(usize, usize)> {
        let (rows, cols) = (self.m.rows, self.m.cols);
        let mut row_fixed = vec![false; self.size];
        let mut col_fixed = vec![false; self.size];
        for r in 0..rows {
            for c in 0..self.size {
                if col_fixed[c] || !self.tight(r, c) {
                    continue;
                }
                let current = self.row_to_col[r];
                // all padding columns are interchangeable
                let same = current == c || (c >= cols && current >= cols);
                if same || self.reroute(r, c, &row_fixed, &col_fixed) {
                    row_fixed[r] = true;
                    col_fixed[self.row_to_col[r]] = true;
                    break;
                }
            }
            debug_assert!(row_fixed[r], "row {r} lost its tight match");
        }
        (0..rows)
            .filter(|&r| self.row_to_col[r] < cols)
            .map(|r| (r, self.row_to_col[r]))
            .collect()
    }
}

/// Minimum-cost assignment covering `min(rows, cols)` pairs. Among equal-cost
/// optima the lexicographically smallest row-sorted pair list is returned.
pub fn solve(m: &CostMatrix) -> Assignment {
    if m.rows == 0 || m.cols == 0 {
        return Assignment { pairs: Vec::new(), total_cost: 0.0 };
    }
    let pairs = TightGraph::new(m).lexicographic_min();
    Assignment::from_pairs(m, pairs)
}

pub const BRUTE_FORCE_MAX_SIDE: usize = 8;
const BRUTE_FORCE_MAX_INJECTIONS: f64 = 5e7;

/// Exhaustive reference solver with the same contract and tie-break as
/// [`solve`]. Only for tiny instances.
pub fn brute_force_solve(m: &CostMatrix) -> Result<Assignment> {
    let (rows, cols) = (m.rows, m.cols);
    let need = rows.min(cols);
    let wide = rows.max(cols);
    let injections: f64 = (0..need).map(|i| (wide - i) as f64).product();
    if need > BRUTE_FORCE_MAX_SIDE || injections > BRUTE_FORCE_MAX_INJECTIONS {
        return Err(Error::TooLarge(format!("{rows}x{cols}")));
    }

    struct Search<'a> {
        m: &'a CostMatrix,
        need: usize,
        used: Vec<bool>,
        current: Vec<(usize, usize)>,
        best: Option<(f64, Vec<(usize, usize)>)>,
    }

    impl Search<'_> {
        fn visit(&mut self, row: usize, cost: f64) {
            if self.current.len() == self.need {
                // enumeration is in lexicographic order, so only strict
                // improvements replace the incumbent
                if self.best.as_ref().is_none_or(|(b, _)| cost < *b) {
                    self.best = Some((cost, self.current.clone()));
                }
                return;
            }
            if row == self.m.rows {
                return;
            }
            for c in 0..self.m.cols {
                if self.used[c] {
                    continue;
                }
                self.used[c] = true;
                self.current.push((row, c));
                self.visit(row + 1, cost + self.m.get(row, c));
                self.current.pop();
                self.used[c] = false;
            }
            let rows_left = self.m.rows - row - 1;
            if rows_left >= self.need - self.current.len() {
                self.visit(row + 1, cost);
            }
        }
    }

    let mut s = Search { m, need, used: vec![false; cols], current: Vec::new(), best: None };
    s.visit(0, 0.0);
    let pairs = s.best.map(|b| b.1).unwrap_or_default();
    Ok(Assignment::from_pairs(m, pairs))
}
