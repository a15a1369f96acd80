//! Minimum-cost matching of every row to a distinct column (Hungarian
//! method with potentials).
//!
//! Forbidden pairs are marked with [`INFEASIBLE`]. Internally they are
//! replaced by a penalty larger than any sentinel-free matching can cost, so
//! the solver returns a sentinel edge only when every perfect matching needs
//! one; that case is reported as [`AssignError::Infeasible`].

use thiserror::Error;

/// Marker for a forbidden row/column pair.
pub const INFEASIBLE: f64 = f64::INFINITY;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssignError {
    #[error("cost matrix is {rows}x{cols}; rows must not outnumber columns")]
    TooManyRows { rows: usize, cols: usize },
    #[error("cost matrix has {got} entries, expected {expected}")]
    Shape { got: usize, expected: usize },
    #[error("cost entry ({row}, {col}) is NaN or -inf")]
    BadCost { row: usize, col: usize },
    #[error("no feasible perfect matching; rows forced onto forbidden pairs: {rows:?}")]
    Infeasible { rows: Vec<usize>, assignment: Vec<usize> },
}

/// Dense row-major cost matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, AssignError> {
        if data.len() != rows * cols {
            return Err(AssignError::Shape { got: data.len(), expected: rows * cols });
        }
        if let Some(pos) = data.iter().position(|c| c.is_nan() || *c == f64::NEG_INFINITY) {
            return Err(AssignError::BadCost { row: pos / cols.max(1), col: pos % cols.max(1) });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self, AssignError> {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self::new(rows, cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Pad with zero-cost rows or columns up to a square matrix.
    pub fn padded(&self) -> Self {
        let n = self.rows.max(self.cols);
        let mut data = vec![0.0; n * n];
        for r in 0..self.rows {
            data[r * n..r * n + self.cols].copy_from_slice(&self.data[r * self.cols..(r + 1) * self.cols]);
        }
        Self { rows: n, cols: n, data }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Matching {
    /// Column matched to each row.
    pub row_to_col: Vec<usize>,
    pub total_cost: f64,
}

/// Minimum-cost matching of every row to a distinct column, for
/// `rows <= cols`, in `O(rows^2 cols)`.
pub fn hungarian(costs: &CostMatrix) -> Result<Matching, AssignError> {
    if costs.rows > costs.cols {
        return Err(AssignError::TooManyRows { rows: costs.rows, cols: costs.cols });
    }
    let n = costs.rows;
    let m = costs.cols;
    if n == 0 {
        return Ok(Matching { row_to_col: Vec::new(), total_cost: 0.0 });
    }

    // Rescale finite costs into [0, 1]; any sentinel-free matching then costs
    // at most n, below a single penalty of n + 1.
    let finite = costs.data.iter().copied().filter(|c| c.is_finite());
    let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), c| (l.min(c), h.max(c)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let penalty = n as f64 + 1.0;
    let a = |r: usize, c: usize| {
        let x = costs.get(r, c);
        if x.is_finite() {
            (x - lo) / span
        } else {
            penalty
        }
    };

    // 1-based potentials formulation; column 0 is a virtual start node.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
                if !used[j] {
                    let cur = a(i0 - 1, j - 1) - u[i0] - v[j];
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
            for j in 0..=m {
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

    let mut row_to_col = vec![0usize; n];
    for j in 1..=m {
        if p[j] > 0 {
            row_to_col[p[j] - 1] = j - 1;
        }
    }
    let forced: Vec<usize> = (0..n).filter(|&r| !costs.get(r, row_to_col[r]).is_finite()).collect();
    if !forced.is_empty() {
        return Err(AssignError::Infeasible { rows: forced, assignment: row_to_col });
    }
    let total_cost = (0..n).map(|r| costs.get(r, row_to_col[r])).sum();
    Ok(Matching { row_to_col, total_cost })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_force(costs: &CostMatrix) -> Option<f64> {
        fn rec(costs: &CostMatrix, row: usize, used: &mut Vec<bool>, acc: f64, best: &mut Option<f64>) {
            let n = costs.rows();
            if row == n {
                if best.is_none_or(|b| acc < b) {
                    *best = Some(acc);
                }
                return;
            }
            for c in 0..n {
                let x = costs.get(row, c);
                if !used[c] && x.is_finite() {
                    used[c] = true;
                    rec(costs, row + 1, used, acc + x, best);
                    used[c] = false;
                }
            }
        }
        let mut best = None;
        rec(costs, 0, &mut vec![false; costs.rows()], 0.0, &mut best);
        best
    }

    #[test]
    fn diagonal_dominant_two_by_two() {
        let m = CostMatrix::new(2, 2, vec![1.0, 2.0, 2.0, 1.0]).unwrap();
        let r = hungarian(&m).unwrap();
        assert_eq!(r.row_to_col, vec![0, 1]);
        assert_eq!(r.total_cost, 2.0);
    }

    #[test]
    fn matches_permutation_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for case in 0..300 {
            let n = 1 + case % 7;
            let m = CostMatrix::from_fn(n, n, |_, _| {
                if rng.random::<f64>() < 0.15 {
                    INFEASIBLE
                } else {
                    rng.random_range(0.0..100.0)
                }
            })
            .unwrap();
            match (hungarian(&m), brute_force(&m)) {
                (Ok(r), Some(b)) => assert!((r.total_cost - b).abs() < 1e-9 * b.max(1.0), "case {case}"),
                (Err(AssignError::Infeasible { .. }), None) => {}
                (got, want) => panic!("case {case}: {got:?} vs {want:?}"),
            }
        }
    }

    #[test]
    fn sentinel_row_is_infeasible() {
        let m = CostMatrix::new(2, 2, vec![INFEASIBLE, INFEASIBLE, 3.0, 1.0]).unwrap();
        assert!(matches!(hungarian(&m), Err(AssignError::Infeasible { rows, .. }) if rows == vec![0]));
    }

    #[test]
    fn sentinel_avoided_when_possible() {
        // cheapest entries sit on the sentinel diagonal's complement
        let m = CostMatrix::new(3, 3, vec![INFEASIBLE, 5.0, 9.0, 1.0, INFEASIBLE, 2.0, 1.0, 1.0, INFEASIBLE]).unwrap();
        let r = hungarian(&m).unwrap();
        assert!((0..3).all(|i| r.row_to_col[i] != i));
        assert_eq!(r.total_cost, brute_force(&m).unwrap());
    }

    #[test]
    fn padding_and_shape_checks() {
        let m = CostMatrix::new(2, 3, vec![4.0, 1.0, 3.0, 2.0, 0.0, 5.0]).unwrap();
        let wide = hungarian(&m).unwrap();
        assert_eq!(wide.total_cost, 3.0);
        let r = hungarian(&m.padded()).unwrap();
        assert_eq!(r.total_cost, 3.0);
        assert_eq!(&r.row_to_col[..2], &wide.row_to_col[..]);
        let tall = CostMatrix::new(3, 2, vec![1.0; 6]).unwrap();
        assert!(matches!(hungarian(&tall), Err(AssignError::TooManyRows { .. })));
        assert!(CostMatrix::new(2, 2, vec![1.0]).is_err());
        assert!(CostMatrix::new(1, 1, vec![f64::NAN]).is_err());
        assert_eq!(hungarian(&CostMatrix::new(0, 0, vec![]).unwrap()).unwrap().total_cost, 0.0);
    }
}
