//! Minimum-cost rectangular assignment via shortest augmenting paths with
//! row/column potentials, `O(R²·C)`.

use crate::error::{MixkitError, Result};

/// Returns `assign[r]`, the column matched to row `r`, minimising the total
/// cost. Requires `rows ≤ cols` and finite costs.
pub fn hungarian_assign(cost: &[Vec<f64>]) -> Result<Vec<usize>> {
    let rows = cost.len();
    if rows == 0 {
        return Ok(Vec::new());
    }
    let cols = cost[0].len();
    if cost.iter().any(|r| r.len() != cols) {
        return Err(MixkitError::InvalidArgument("cost matrix rows differ in length".into()));
    }
    if rows > cols {
        return Err(MixkitError::InvalidArgument(format!(
            "more rows ({rows}) than columns ({cols}) in assignment"
        )));
    }
    if cost.iter().flatten().any(|v| !v.is_finite()) {
        return Err(MixkitError::InvalidArgument("assignment costs must be finite".into()));
    }

    // 1-based with a virtual column 0, as in the classic potential method.
    let mut u = vec![0.0; rows + 1];
    let mut v = vec![0.0; cols + 1];
    let mut matched_row = vec![0usize; cols + 1];
    let mut way = vec![0usize; cols + 1];
    for i in 1..=rows {
        matched_row[0] = i;
        let mut j0 = 0;
        let mut min_to = vec![f64::INFINITY; cols + 1];
        let mut used = vec![false; cols + 1];
        loop {
            used[j0] = true;
            let i0 = matched_row[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=cols {
                if used[j] {
                    continue;
                }
                let reduced = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if reduced < min_to[j] {
                    min_to[j] = reduced;
                    way[j] = j0;
                }
                if min_to[j] < delta {
                    delta = min_to[j];
                    j1 = j;
                }
            }
            for j in 0..=cols {
                if used[j] {
                    u[matched_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_to[j] -= delta;
                }
            }
            j0 = j1;
            if matched_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched_row[j0] = matched_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assign = vec![0usize; rows];
    for j in 1..=cols {
        if matched_row[j] != 0 {
            assign[matched_row[j] - 1] = j - 1;
        }
    }
    Ok(assign)
}

/// Sum of `cost[r][assign[r]]` in row order.
pub fn assignment_cost(cost: &[Vec<f64>], assign: &[usize]) -> f64 {
    assign.iter().enumerate().map(|(r, &c)| cost[r][c]).sum()
}
