/// Minimum-cost assignment on a square cost matrix in O(n³), via shortest
/// augmenting paths with dual potentials.
///
/// Returns `(assignment, total)` where `assignment[row] = column`.
pub fn solve_assignment(cost: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let n = cost.len();
    if n == 0 {
        return (Vec::new(), 0.0);
    }
    debug_assert!(cost.iter().all(|row| row.len() == n));

    // Row/column potentials; index n is the virtual start column.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    // row_of[j] = row currently assigned to column j (n = unassigned).
    let mut row_of = vec![n; n + 1];
    let mut path = vec![0usize; n + 1];

    for i in 0..n {
        row_of[n] = i;
        let mut j0 = n;
        let mut min_to = vec![f64::INFINITY; n + 1];
        let mut visited = vec![false; n + 1];
        loop {
            visited[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = n;
            for j in 0..n {
                if !visited[j] {
                    let reduced = cost[i0][j] - u[i0] - v[j];
                    if reduced < min_to[j] {
                        min_to[j] = reduced;
                        path[j] = j0;
                    }
                    if min_to[j] < delta {
                        delta = min_to[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if visited[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_to[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == n {
                break;
            }
        }
        // Augment along the alternating path back to the virtual column.
        while j0 != n {
            let j1 = path[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
        }
    }

    let mut assignment = vec![usize::MAX; n];
    let mut total = 0.0;
    for j in 0..n {
        let i = row_of[j];
        assignment[i] = j;
        total += cost[i][j];
    }
    (assignment, total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_force(cost: &[Vec<f64>]) -> f64 {
        let n = cost.len();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut best = f64::INFINITY;
        permute(&mut perm, 0, &mut |p| {
            let t: f64 = p.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
            if t < best {
                best = t;
            }
        });
        best
    }

    fn permute(v: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
        if k == v.len() {
            f(v);
            return;
        }
        for i in k..v.len() {
            v.swap(k, i);
            permute(v, k + 1, f);
            v.swap(k, i);
        }
    }

    #[test]
    fn known_three_by_three() {
        let cost = vec![
            vec![8.0, 5.0, 9.0],
            vec![4.0, 2.0, 4.0],
            vec![7.0, 3.0, 8.0],
        ];
        let (assignment, total) = solve_assignment(&cost);
        assert_eq!(assignment, vec![0, 2, 1]);
        assert_eq!(total, 15.0);
    }

    #[test]
    fn matches_brute_force_on_random_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 1..=7 {
            for _ in 0..20 {
                let cost: Vec<Vec<f64>> = (0..n)
                    .map(|_| (0..n).map(|_| rng.random::<f64>() * 10.0).collect())
                    .collect();
                let (_, total) = solve_assignment(&cost);
                let expect = brute_force(&cost);
                assert!((total - expect).abs() < 1e-9, "n={n}: {total} vs {expect}");
            }
        }
    }
}
