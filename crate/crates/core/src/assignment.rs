//! Rectangular linear assignment (Kuhn-Munkres) with deterministic tie-breaking.
//!
//! Among all minimum-cost assignments the one whose pair list, sorted by
//! `(row, col)`, is lexicographically smallest is returned. This is done by
//! solving once for optimal dual potentials and then picking the
//! lexicographically smallest perfect matching in the equality subgraph.

/// Dense row-major cost matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn total(&self, pairs: &[(usize, usize)]) -> f64 {
        pairs.iter().map(|&(i, j)| self.get(i, j)).sum()
    }
}

/// Minimum-cost one-to-one assignment; returns `min(rows, cols)` pairs sorted by row.
///
/// Costs must be finite.
pub fn min_cost_assignment(costs: &CostMatrix) -> Vec<(usize, usize)> {
    let (rows, cols) = (costs.rows, costs.cols);
    if rows == 0 || cols == 0 {
        return Vec::new();
    }
    let n = rows.max(cols);
    let cost = |i: usize, j: usize| -> f64 {
        if i < rows && j < cols {
            costs.get(i, j)
        } else {
            0.0
        }
    };
    debug_assert!(costs.data.iter().all(|c| c.is_finite()));

    let (u, v, mut row_of) = hungarian(n, &cost);

    let scale = costs.data.iter().fold(1.0f64, |m, c| m.max(c.abs()));
    let eps = 1e-9 * scale;
    let tight: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| (cost(i, j) - u[i + 1] - v[j + 1]).abs() <= eps)
                .collect()
        })
        .collect();

    let mut col_of = vec![usize::MAX; n];
    for (j, &i) in row_of.iter().enumerate() {
        col_of[i] = j;
    }
    lex_smallest_matching(rows, &tight, &mut col_of, &mut row_of);

    (0..rows)
        .filter(|&i| col_of[i] < cols)
        .map(|i| (i, col_of[i]))
        .collect()
}

/// Classic O(n^3) shortest-augmenting-path Hungarian method on a square
/// matrix. Returns the potentials `u` (rows) and `v` (cols), both 1-based,
/// and the row assigned to each column (0-based).
fn hungarian(n: usize, cost: &impl Fn(usize, usize) -> f64) -> (Vec<f64>, Vec<f64>, Vec<usize>) {
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
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
    let row_of = (1..=n).map(|j| p[j] - 1).collect();
    (u, v, row_of)
}

/// Rewrites a perfect matching on the `tight` graph into the lexicographically
/// smallest one over the first `fix_rows` rows, by fixing rows in order to the
/// smallest column that still admits a perfect matching.
fn lex_smallest_matching(fix_rows: usize, tight: &[Vec<usize>], col_of: &mut [usize], row_of: &mut [usize]) {
    let n = col_of.len();
    let mut row_fixed = vec![false; n];
    let mut col_fixed = vec![false; n];
    for i in 0..fix_rows {
        for &j in &tight[i] {
            if col_fixed[j] {
                continue;
            }
            if col_of[i] == j {
                break;
            }
            let displaced = row_of[j];
            if let Some(path) = alternating_path(displaced, col_of[i], j, tight, &row_fixed, &col_fixed, row_of) {
                // path: (row, new col) moves ending at the column `i` frees.
                let freed = col_of[i];
                for &(r, c) in &path {
                    col_of[r] = c;
                    row_of[c] = r;
                }
                debug_assert_eq!(path.last().map(|p| p.1), Some(freed));
                col_of[i] = j;
                row_of[j] = i;
                break;
            }
        }
        row_fixed[i] = true;
        col_fixed[col_of[i]] = true;
    }
}

/// BFS for a chain of reassignments that moves `start` row off its column onto
/// `target` column, never touching fixed rows/cols or column `banned`.
fn alternating_path(
    start: usize,
    target: usize,
    banned: usize,
    tight: &[Vec<usize>],
    row_fixed: &[bool],
    col_fixed: &[bool],
    row_of: &[usize],
) -> Option<Vec<(usize, usize)>> {
    let n = row_of.len();
    let mut parent_col: Vec<Option<(usize, usize)>> = vec![None; n]; // col -> (row that reaches it, prev col of that row's entry)
    let mut seen = vec![false; n];
    let mut queue = std::collections::VecDeque::from([start]);
    let mut entry_col = vec![usize::MAX; n]; // row -> column through which it was reached
    entry_col[start] = banned;
    while let Some(r) = queue.pop_front() {
        if row_fixed[r] {
            continue;
        }
        for &c in &tight[r] {
            if seen[c] || col_fixed[c] || c == banned {
                continue;
            }
            seen[c] = true;
            parent_col[c] = Some((r, entry_col[r]));
            if c == target {
                let mut path = Vec::new();
                let mut cur = c;
                loop {
                    let (row, prev) = parent_col[cur].expect("reached column has a parent");
                    path.push((row, cur));
                    if prev == banned {
                        break;
                    }
                    cur = prev;
                }
                path.reverse();
                return Some(path);
            }
            let next = row_of[c];
            if entry_col[next] == usize::MAX {
                entry_col[next] = c;
                queue.push_back(next);
            }
        }
    }
    None
}
