//! Kuhn-Munkres over a dense similarity matrix.

/// Maximum-weight one-to-one matching of rows to columns. Returns the total
/// weight and, per row, the matched column (if any).
pub fn max_weight_matching(sim: &[Vec<f64>]) -> (f64, Vec<Option<usize>>) {
    let rows = sim.len();
    let cols = sim.iter().map(Vec::len).max().unwrap_or(0);
    let n = rows.max(cols);
    if n == 0 {
        return (0.0, Vec::new());
    }
    let cost = |i: usize, j: usize| -> f64 {
        -sim.get(i).and_then(|r| r.get(j)).copied().unwrap_or(0.0)
    };

    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
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

    let mut matched = vec![None; rows];
    let mut total = 0.0;
    for (c, &row) in p[1..].iter().enumerate() {
        let i = row - 1;
        if i < rows && c < sim[i].len() {
            matched[i] = Some(c);
            total += sim[i][c];
        }
    }
    (total, matched)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square() {
        let sim = vec![vec![4.0, 1.0, 3.0], vec![2.0, 0.0, 5.0], vec![3.0, 2.0, 2.0]];
        let (total, m) = max_weight_matching(&sim);
        assert_eq!(total, 11.0);
        assert_eq!(m, vec![Some(0), Some(2), Some(1)]);
    }

    #[test]
    fn rectangular() {
        let (total, m) = max_weight_matching(&[vec![0.2, 0.9, 0.1]]);
        assert_eq!(total, 0.9);
        assert_eq!(m, vec![Some(1)]);
        let (total, m) = max_weight_matching(&[vec![0.5], vec![0.7]]);
        assert_eq!(total, 0.7);
        assert_eq!(m, vec![None, Some(0)]);
        assert_eq!(max_weight_matching(&[]).0, 0.0);
    }
}
