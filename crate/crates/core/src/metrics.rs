//! OSPA distance and the exact assignment solver behind it.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OspaParams {
    pub order: f64,
    pub cutoff: f64,
}

impl Default for OspaParams {
    fn default() -> Self {
        Self {
            order: 2.0,
            cutoff: 150.0,
        }
    }
}

/// Total distance with its localization and cardinality parts.
/// `total^p == loc^p + card^p`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct OspaResult {
    pub total: f64,
    pub loc: f64,
    pub card: f64,
}

/// Minimum-cost matching of every row of a rectangular cost matrix
/// (`rows <= cols`) or every column (`rows > cols`).
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// Matched `(row, col)` pairs sorted by row.
    pub pairs: Vec<(usize, usize)>,
    pub cost: f64,
}

/// Shortest augmenting path Hungarian method, O(n²m). Rows are processed in
/// index order and the lowest column index wins any tie, so equal inputs
/// always give the same matching.
pub fn assignment_solve(cost: &[Vec<f64>]) -> Assignment {
    let n_rows = cost.len();
    let n_cols = cost.first().map_or(0, |r| r.len());
    if n_rows == 0 || n_cols == 0 {
        return Assignment {
            pairs: Vec::new(),
            cost: 0.0,
        };
    }
    if n_rows > n_cols {
        let t: Vec<Vec<f64>> = (0..n_cols).map(|j| (0..n_rows).map(|i| cost[i][j]).collect()).collect();
        let a = assignment_solve(&t);
        let mut pairs: Vec<_> = a.pairs.into_iter().map(|(j, i)| (i, j)).collect();
        pairs.sort_unstable();
        return Assignment { pairs, cost: a.cost };
    }

    let (n, m) = (n_rows, n_cols);
    // 1-based potentials; column 0 is the virtual source.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut pairs: Vec<(usize, usize)> = (1..=m).filter(|&j| owner[j] != 0).map(|j| (owner[j] - 1, j - 1)).collect();
    pairs.sort_unstable();
    let total = pairs.iter().map(|&(i, j)| cost[i][j]).sum();
    Assignment { pairs, cost: total }
}

fn lex_cmp(a: &[[f64; 2]], b: &[[f64; 2]]) -> Ordering {
    a.len().cmp(&b.len()).then_with(|| {
        a.iter()
            .flatten()
            .zip(b.iter().flatten())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    })
}

/// OSPA distance between two sets of planar positions.
pub fn ospa(x: &[[f64; 2]], y: &[[f64; 2]], params: &OspaParams) -> OspaResult {
    // A canonical argument order makes the result exactly symmetric.
    let (x, y) = if lex_cmp(x, y) == Ordering::Greater { (y, x) } else { (x, y) };
    let (m, n) = (x.len(), y.len());
    let big = m.max(n);
    if big == 0 {
        return OspaResult::default();
    }
    let (p, c) = (params.order, params.cutoff);
    let cost: Vec<Vec<f64>> = x
        .iter()
        .map(|a| {
            y.iter()
                .map(|b| ((a[0] - b[0]).hypot(a[1] - b[1])).min(c).powf(p))
                .collect()
        })
        .collect();
    let loc_sum = assignment_solve(&cost).cost;
    let card_sum = c.powf(p) * m.abs_diff(n) as f64;
    let big = big as f64;
    OspaResult {
        total: ((loc_sum + card_sum) / big).powf(1.0 / p),
        loc: (loc_sum / big).powf(1.0 / p),
        card: (card_sum / big).powf(1.0 / p),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tiny_assignments() {
        let a = assignment_solve(&[vec![7.0]]);
        assert_eq!(a.pairs, vec![(0, 0)]);
        assert_eq!(a.cost, 7.0);
        let a = assignment_solve(&[vec![1.0, 10.0], vec![10.0, 1.0]]);
        assert_eq!(a.pairs, vec![(0, 0), (1, 1)]);
        assert_eq!(a.cost, 2.0);
    }

    #[test]
    fn tall_matrix_matches_every_column() {
        let a = assignment_solve(&[vec![5.0], vec![1.0], vec![3.0]]);
        assert_eq!(a.pairs, vec![(1, 0)]);
        assert_eq!(a.cost, 1.0);
    }

    #[test]
    fn ties_resolve_identically() {
        let c = vec![vec![1.0; 3]; 3];
        assert_eq!(assignment_solve(&c), assignment_solve(&c));
    }

    #[test]
    fn single_point_against_empty() {
        let r = ospa(&[[3.0, 4.0]], &[], &OspaParams::default());
        assert_eq!(r, OspaResult { total: 150.0, loc: 0.0, card: 150.0 });
        assert_eq!(ospa(&[], &[], &OspaParams::default()), OspaResult::default());
    }

    #[test]
    fn identical_sets_are_zero() {
        let x = [[1.0, 2.0], [30.0, -4.0], [7.0, 7.0]];
        assert_eq!(ospa(&x, &x, &OspaParams::default()).total, 0.0);
    }

    #[test]
    fn hand_computed_case() {
        // One pair at distance 5 and one unmatched point.
        let r = ospa(&[[0.0, 0.0], [500.0, 0.0]], &[[3.0, 4.0]], &OspaParams { order: 2.0, cutoff: 100.0 });
        assert!((r.total - ((25.0 + 10_000.0) / 2.0f64).sqrt()).abs() < 1e-12);
        assert!((r.loc - 12.5f64.sqrt()).abs() < 1e-12);
        assert!((r.card - 5_000.0f64.sqrt()).abs() < 1e-12);
    }
}
