//! Dense linear assignment by shortest augmenting paths (Jonker–Volgenant
//! style, O(r³)), followed by a lexicographic tie-break over the optimal face.

use crate::error::{ChasmError, Result};

/// A bijection on `{0, …, r-1}`; `mapping[i]` is the column assigned to row `i`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Permutation {
    mapping: Vec<usize>,
}

impl Permutation {
    pub fn identity(r: usize) -> Self {
        Self {
            mapping: (0..r).collect(),
        }
    }

    /// Validates that `mapping` hits every index exactly once.
    pub fn from_mapping(mapping: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; mapping.len()];
        for &j in &mapping {
            if j >= mapping.len() || std::mem::replace(&mut seen[j], true) {
                return Err(ChasmError::invalid(
                    "mapping",
                    format!("{mapping:?} is not a permutation"),
                ));
            }
        }
        Ok(Self { mapping })
    }

    pub fn len(&self) -> usize {
        self.mapping.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mapping.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.mapping
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.mapping
    }

    /// `out[i] = values[mapping[i]]`.
    pub fn apply<T: Copy>(&self, values: &[T]) -> Vec<T> {
        self.mapping.iter().map(|&j| values[j]).collect()
    }
}

/// Row-major square cost matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    n: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(ChasmError::DimensionMismatch {
                expected: n * n,
                got: data.len(),
            });
        }
        Ok(Self { n, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(ChasmError::DimensionMismatch {
                    expected: n,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Self { n, data })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Total cost of `perm`, summed in row order.
    pub fn objective(&self, perm: &Permutation) -> f64 {
        perm.as_slice()
            .iter()
            .enumerate()
            .map(|(i, &j)| self.get(i, j))
            .sum()
    }
}

/// Minimum-cost perfect assignment.
///
/// Among several optimal assignments the lexicographically smallest mapping
/// is returned.
pub fn solve_assignment(cost: &CostMatrix) -> Result<Permutation> {
    if cost.data.iter().any(|c| !c.is_finite()) {
        return Err(ChasmError::NonFinite("cost matrix"));
    }
    let n = cost.n;
    if n == 0 {
        return Ok(Permutation::identity(0));
    }
    let (row_to_col, u, v) = shortest_augmenting_path(cost);
    let best = Permutation {
        mapping: row_to_col,
    };

    let scale = cost.data.iter().fold(1.0_f64, |m, c| m.max(c.abs()));
    let tol = 1e-12 * scale * n as f64;
    let tight = |i: usize, j: usize| cost.get(i, j) - u[i] - v[j] <= tol;
    match lexicographic_matching(n, tight) {
        Some(lex) if cost.objective(&lex) <= cost.objective(&best) => Ok(lex),
        _ => Ok(best),
    }
}

/// Shortest augmenting path with dual potentials. Returns the row→column
/// assignment together with row duals `u` and column duals `v`, satisfying
/// `cost[i][j] - u[i] - v[j] ≥ 0` with equality on assigned pairs (up to
/// round-off).
fn shortest_augmenting_path(cost: &CostMatrix) -> (Vec<usize>, Vec<f64>, Vec<f64>) {
    const NONE: usize = usize::MAX;
    let n = cost.n;
    let mut u = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut col_owner = vec![NONE; n];
    let mut row_to_col = vec![NONE; n];
    let mut shortest = vec![0.0; n];
    let mut pred = vec![0usize; n];
    let mut scanned = vec![false; n];

    for start in 0..n {
        shortest.fill(f64::INFINITY);
        scanned.fill(false);
        let mut row = start;
        let mut min_dist = 0.0;
        let sink = loop {
            let mut next_col = NONE;
            let mut next_dist = f64::INFINITY;
            for j in 0..n {
                if scanned[j] {
                    continue;
                }
                let d = min_dist + cost.get(row, j) - u[row] - v[j];
                if d < shortest[j] {
                    shortest[j] = d;
                    pred[j] = row;
                }
                if shortest[j] < next_dist || (shortest[j] == next_dist && col_owner[j] == NONE) {
                    next_dist = shortest[j];
                    next_col = j;
                }
            }
            scanned[next_col] = true;
            min_dist = next_dist;
            if col_owner[next_col] == NONE {
                break next_col;
            }
            row = col_owner[next_col];
        };

        // Dual update over the scanned tree.
        u[start] += min_dist;
        for j in 0..n {
            if scanned[j] && j != sink {
                u[col_owner[j]] += min_dist - shortest[j];
                v[j] -= min_dist - shortest[j];
            }
        }

        // Augment along the predecessor chain.
        let mut j = sink;
        loop {
            let i = pred[j];
            col_owner[j] = i;
            let displaced = std::mem::replace(&mut row_to_col[i], j);
            if i == start {
                break;
            }
            j = displaced;
        }
    }
    (row_to_col, u, v)
}

/// Lexicographically smallest perfect matching using only edges accepted by
/// `allowed`, or `None` if there is none.
fn lexicographic_matching(n: usize, allowed: impl Fn(usize, usize) -> bool) -> Option<Permutation> {
    let adj: Vec<Vec<bool>> = (0..n)
        .map(|i| (0..n).map(|j| allowed(i, j)).collect())
        .collect();
    let mut mapping = Vec::with_capacity(n);
    let mut used = vec![false; n];
    for i in 0..n {
        let pick = (0..n).find(|&j| {
            if used[j] || !adj[i][j] {
                return false;
            }
            used[j] = true;
            let ok = has_perfect_matching(&adj, i + 1, &used);
            used[j] = false;
            ok
        })?;
        used[pick] = true;
        mapping.push(pick);
    }
    Some(Permutation { mapping })
}

/// Kuhn's augmenting-path check that rows `first_row..n` can be matched into
/// the columns not marked in `blocked`.
fn has_perfect_matching(adj: &[Vec<bool>], first_row: usize, blocked: &[bool]) -> bool {
    let n = adj.len();
    let mut owner = vec![usize::MAX; n];

    fn try_row(
        i: usize,
        adj: &[Vec<bool>],
        blocked: &[bool],
        owner: &mut [usize],
        visited: &mut [bool],
    ) -> bool {
        for j in 0..adj.len() {
            if blocked[j] || !adj[i][j] || visited[j] {
                continue;
            }
            visited[j] = true;
            if owner[j] == usize::MAX || try_row(owner[j], adj, blocked, owner, visited) {
                owner[j] = i;
                return true;
            }
        }
        false
    }

    (first_row..n).all(|i| {
        let mut visited = vec![false; n];
        try_row(i, adj, blocked, &mut owner, &mut visited)
    })
}
