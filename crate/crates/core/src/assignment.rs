//! Rectangular assignment with forbidden cells and a cost for leaving an
//! observation unmatched.
//!
//! Rows are existing tracklets, columns are observations. The objective is
//! `Σ matched cost + new_track_cost × (unmatched columns)`; unmatched rows are
//! free. The problem is embedded in a square `(n + m)` matrix with one dummy
//! column per row (cost 0) and one dummy row per column (cost
//! `new_track_cost`), then solved with the shortest-augmenting-path Hungarian
//! method. Among equal-cost optima the lexicographically smallest row mapping
//! (`None` before `Some(0)` before `Some(1)` ...) is returned.

/// Marker for a forbidden cell.
pub const INFEASIBLE: f64 = f64::INFINITY;

/// Tolerance used when comparing optimal costs during tie-breaking.
const COST_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// `rows[i]` is the column matched to row `i`, if any.
    pub rows: Vec<Option<usize>>,
    pub cost: f64,
}

impl Assignment {
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .filter_map(|(i, c)| c.map(|c| (i, c)))
    }

    pub fn matched(&self) -> usize {
        self.rows.iter().flatten().count()
    }
}

/// Total objective of a mapping, summed in row order.
pub fn assignment_cost(cost: &[Vec<f64>], n_cols: usize, rows: &[Option<usize>], new_track_cost: f64) -> f64 {
    let mut total = 0.0;
    let mut matched = 0;
    for (i, c) in rows.iter().enumerate() {
        if let Some(j) = c {
            total += cost[i][*j];
            matched += 1;
        }
    }
    total + new_track_cost * (n_cols - matched) as f64
}

fn n_cols(cost: &[Vec<f64>]) -> usize {
    cost.first().map_or(0, Vec::len)
}

/// Row constraint during tie-break refinement.
#[derive(Clone, Copy)]
enum Fix {
    Free,
    Unmatched,
    Column(usize),
}

struct Solution {
    rows: Vec<Option<usize>>,
    /// Row and column potentials of the square problem.
    u: Vec<f64>,
    v: Vec<f64>,
}

fn square_cost(cost: &[Vec<f64>], ntc: f64, fixes: &[Fix], i: usize, j: usize) -> f64 {
    let n = cost.len();
    let m = n_cols(cost);
    match (i < n, j < m) {
        (true, true) => match fixes[i] {
            Fix::Free => cost[i][j],
            Fix::Column(c) if c == j => cost[i][j],
            _ => INFEASIBLE,
        },
        (true, false) => match fixes[i] {
            Fix::Column(_) => INFEASIBLE,
            _ if j - m == i => 0.0,
            _ => INFEASIBLE,
        },
        (false, true) => {
            if i - n == j {
                ntc
            } else {
                INFEASIBLE
            }
        }
        (false, false) => 0.0,
    }
}

/// Hungarian method (potentials + shortest augmenting paths) on the square
/// embedding. Returns `None` when the fixes admit no finite solution.
fn hungarian(cost: &[Vec<f64>], ntc: f64, fixes: &[Fix]) -> Option<Solution> {
    let n = cost.len();
    let m = n_cols(cost);
    let size = n + m;
    let a = |i: usize, j: usize| square_cost(cost, ntc, fixes, i, j);

    // 1-based arrays; index 0 is the virtual root.
    let mut u = vec![0.0; size + 1];
    let mut v = vec![0.0; size + 1];
    let mut p = vec![0usize; size + 1];
    let mut way = vec![0usize; size + 1];
    for i in 1..=size {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; size + 1];
        let mut used = vec![false; size + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=size {
                if used[j] {
                    continue;
                }
                let c = a(i0 - 1, j - 1);
                if c.is_finite() {
                    let cur = c - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            if !delta.is_finite() {
                return None;
            }
            for j in 0..=size {
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

    let mut rows = vec![None; n];
    for j in 1..=size {
        let i = p[j];
        if i >= 1 && i <= n && j <= m {
            rows[i - 1] = Some(j - 1);
        }
    }
    Some(Solution {
        rows,
        u: u[1..].to_vec(),
        v: v[1..].to_vec(),
    })
}

/// Minimum-cost partial assignment. Forbidden cells carry [`INFEASIBLE`]
/// (any non-finite value); `new_track_cost` is charged per unmatched column.
pub fn solve_assignment(cost: &[Vec<f64>], new_track_cost: f64) -> Assignment {
    let n = cost.len();
    let m = n_cols(cost);
    debug_assert!(cost.iter().all(|r| r.len() == m), "ragged cost matrix");
    if n == 0 || m == 0 {
        return Assignment {
            rows: vec![None; n],
            cost: new_track_cost * m as f64,
        };
    }
    let cost: Vec<Vec<f64>> = cost
        .iter()
        .map(|r| r.iter().map(|&c| if c.is_finite() { c } else { INFEASIBLE }).collect())
        .collect();

    let mut fixes = vec![Fix::Free; n];
    let base = hungarian(&cost, new_track_cost, &fixes).expect("dummy embedding is always feasible");
    let optimum = assignment_cost(&cost, m, &base.rows, new_track_cost);
    let tol = COST_TOL * (1.0 + optimum.abs());
    let (u, v) = (&base.u, &base.v);
    let mut best = base.rows.clone();

    // Lexicographic refinement. An edge can only appear in an optimal
    // solution if its reduced cost under the optimal duals is zero.
    for i in 0..n {
        let current = best[i];
        let mut candidates: Vec<Option<usize>> = vec![None];
        candidates.extend((0..m).map(Some));
        for cand in candidates.into_iter().take_while(|c| *c < current) {
            let (edge_cost, col) = match cand {
                None => (0.0, m + i),
                Some(j) => (cost[i][j], j),
            };
            if !edge_cost.is_finite() || edge_cost - u[i] - v[col] > tol {
                continue;
            }
            fixes[i] = match cand {
                None => Fix::Unmatched,
                Some(j) => Fix::Column(j),
            };
            if let Some(sol) = hungarian(&cost, new_track_cost, &fixes) {
                if assignment_cost(&cost, m, &sol.rows, new_track_cost) <= optimum + tol {
                    best = sol.rows;
                    break;
                }
            }
        }
        fixes[i] = match best[i] {
            None => Fix::Unmatched,
            Some(j) => Fix::Column(j),
        };
    }

    let total = assignment_cost(&cost, m, &best, new_track_cost);
    Assignment { rows: best, cost: total }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BIG: f64 = 1e6;

    #[test]
    fn identity_on_zero_diagonal() {
        let c = vec![vec![0.0, 1.0, 1.0], vec![1.0, 0.0, 1.0], vec![1.0, 1.0, 0.0]];
        let a = solve_assignment(&c, BIG);
        assert_eq!(a.rows, vec![Some(0), Some(1), Some(2)]);
        assert_eq!(a.cost, 0.0);
    }

    #[test]
    fn three_by_three_permutation() {
        let c = vec![vec![4.0, 1.0, 3.0], vec![2.0, 0.0, 5.0], vec![3.0, 2.0, 2.0]];
        let a = solve_assignment(&c, BIG);
        assert_eq!(a.rows, vec![Some(1), Some(0), Some(2)]);
        assert_eq!(a.cost, 5.0);
    }

    #[test]
    fn all_infeasible_is_empty() {
        let c = vec![vec![INFEASIBLE; 3]; 2];
        let a = solve_assignment(&c, 2.0);
        assert_eq!(a.rows, vec![None, None]);
        assert_eq!(a.cost, 6.0);
    }

    #[test]
    fn new_track_cost_caps_matches() {
        assert_eq!(solve_assignment(&[vec![3.0]], 4.0).rows, vec![Some(0)]);
        assert_eq!(solve_assignment(&[vec![3.0]], 2.0).rows, vec![None]);
        // equal cost: unmatched is lexicographically smaller
        assert_eq!(solve_assignment(&[vec![3.0]], 3.0).rows, vec![None]);
    }

    #[test]
    fn ties_resolve_lexicographically() {
        let c = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        assert_eq!(solve_assignment(&c, BIG).rows, vec![Some(0), Some(1)]);
        let c = vec![vec![2.0, 1.0, 1.0]];
        assert_eq!(solve_assignment(&c, BIG).rows, vec![Some(1)]);
    }

    #[test]
    fn rectangular_shapes() {
        let c = vec![vec![5.0], vec![1.0], vec![3.0]];
        let a = solve_assignment(&c, BIG);
        assert_eq!(a.rows, vec![None, Some(0), None]);
        let c = vec![vec![5.0, 1.0, INFEASIBLE, 2.0]];
        let a = solve_assignment(&c, 10.0);
        assert_eq!(a.rows, vec![Some(1)]);
        assert_eq!(a.cost, 31.0);
    }

    #[test]
    fn empty_matrix() {
        let a = solve_assignment(&[], 1.0);
        assert!(a.rows.is_empty());
        assert_eq!(a.cost, 0.0);
    }
}
