use nalgebra::DMatrix;

/// Optimal gated assignment.
///
/// Pairs whose cost exceeds `max_cost` (or is not finite) are forbidden. The
/// result has the largest possible number of allowed pairs and, among those,
/// the smallest total cost. Pairs are returned sorted by row.
pub fn assign_min_cost(cost: &DMatrix<f64>, max_cost: f64) -> Vec<(usize, usize)> {
    let (rows, cols) = cost.shape();
    if rows == 0 || cols == 0 {
        return Vec::new();
    }
    let allowed = |c: f64| c.is_finite() && c <= max_cost;
    let max_abs = cost
        .iter()
        .filter(|c| allowed(**c))
        .fold(0.0_f64, |m, c| m.max(c.abs()));
    if !cost.iter().any(|c| allowed(*c)) {
        return Vec::new();
    }
    // Larger than any achievable difference in total allowed cost.
    let forbidden = 2.0 * (max_abs + 1.0) * (rows.min(cols) as f64 + 1.0);
    let gated = cost.map(|c| if allowed(c) { c } else { forbidden });

    let pairs: Vec<(usize, usize)> = if rows <= cols {
        hungarian(&gated).into_iter().enumerate().collect()
    } else {
        let mut p: Vec<(usize, usize)> = hungarian(&gated.transpose())
            .into_iter()
            .enumerate()
            .map(|(c, r)| (r, c))
            .collect();
        p.sort_unstable();
        p
    };
    pairs.into_iter().filter(|&(r, c)| allowed(cost[(r, c)])).collect()
}

/// Shortest-augmenting-path Hungarian method for `n ≤ m`; returns the column
/// assigned to each row.
fn hungarian(a: &DMatrix<f64>) -> Vec<usize> {
    let (n, m) = a.shape();
    debug_assert!(n <= m);
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    // p[j]: row (1-based) matched to column j; p[0] is the row being inserted.
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
                if used[j] {
                    continue;
                }
                let cur = a[(i0 - 1, j - 1)] - u[i0] - v[j];
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
    let mut assignment = vec![0usize; n];
    for j in 1..=m {
        if p[j] != 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    assignment
}
