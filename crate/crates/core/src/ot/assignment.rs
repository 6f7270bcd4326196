//! Dense O(m³) assignment solver (shortest augmenting paths with row and
//! column prices, the Hungarian / Jonker–Volgenant family).

use super::CostMatrix;

/// Optimal permutation plus the solver's final prices.
///
/// Prices satisfy `row_price[i] + col_price[j] ≤ c[i][j]` everywhere, with
/// equality on every matched pair.
#[derive(Clone, Debug, PartialEq)]
pub struct Assignment {
    pub row_to_col: Vec<usize>,
    pub row_price: Vec<f64>,
    pub col_price: Vec<f64>,
}

impl Assignment {
    pub fn col_to_row(&self) -> Vec<usize> {
        let mut inv = vec![0; self.row_to_col.len()];
        for (i, &j) in self.row_to_col.iter().enumerate() {
            inv[j] = i;
        }
        inv
    }

    pub fn total_cost(&self, cost: &CostMatrix) -> f64 {
        self.row_to_col
            .iter()
            .enumerate()
            .map(|(i, &j)| cost.get(i, j))
            .sum()
    }
}

/// Minimum-cost perfect matching of rows to columns.
///
/// Rows are inserted in ascending order; when two columns reach the same
/// reduced distance the lower index is taken, so the result is deterministic.
pub fn assign(cost: &CostMatrix) -> Assignment {
    let n = cost.size();
    // 1-based with a virtual column 0 as the root of each search tree.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![0.0f64; n + 1];
    let mut used = vec![false; n + 1];

    for row in 1..=n {
        owner[0] = row;
        let mut j0 = 0usize;
        minv.fill(f64::INFINITY);
        used.fill(false);
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let costs = cost.row(i0 - 1);
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let reduced = costs[j - 1] - u[i0] - v[j];
                if reduced < minv[j] {
                    minv[j] = reduced;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
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
        // Augment along the alternating path back to the root.
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut row_to_col = vec![0usize; n];
    for j in 1..=n {
        row_to_col[owner[j] - 1] = j - 1;
    }
    Assignment {
        row_to_col,
        row_price: u[1..].to_vec(),
        col_price: v[1..].to_vec(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cm(rows: &[&[f64]]) -> CostMatrix {
        CostMatrix::from_rows(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    #[test]
    fn single_entry() {
        let a = assign(&cm(&[&[12.5]]));
        assert_eq!(a.row_to_col, vec![0]);
        assert_eq!(a.row_price[0] + a.col_price[0], 12.5);
    }

    #[test]
    fn anti_diagonal_is_found() {
        let a = assign(&cm(&[&[5.0, 1.0, 9.0], &[1.0, 9.0, 9.0], &[9.0, 9.0, 1.0]]));
        assert_eq!(a.row_to_col, vec![1, 0, 2]);
    }

    #[test]
    fn ties_resolve_to_lowest_index() {
        let a = assign(&cm(&[&[1.0, 1.0], &[1.0, 1.0]]));
        assert_eq!(a.row_to_col, vec![0, 1]);
    }

    #[test]
    fn prices_are_feasible_and_tight_on_matching() {
        let c = cm(&[
            &[4.0, 1.0, 3.0, 7.0],
            &[2.0, 0.0, 5.0, 1.0],
            &[3.0, 2.0, 2.0, 6.0],
            &[8.0, 4.0, 1.0, 2.0],
        ]);
        let a = assign(&c);
        for i in 0..4 {
            for j in 0..4 {
                assert!(a.row_price[i] + a.col_price[j] <= c.get(i, j) + 1e-12);
            }
            let j = a.row_to_col[i];
            assert!((a.row_price[i] + a.col_price[j] - c.get(i, j)).abs() < 1e-12);
        }
    }
}
