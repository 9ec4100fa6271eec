//! Shift- and permutation-invariant error metrics.
//!
//! Estimates are only defined up to a cyclic shift of each signal and a
//! relabeling of the set, so every error we report minimizes over both.

use crate::hungarian::solve_assignment;
use crate::{Dft, Error, MixingWeights, Result, Signal, SignalSet};

/// Best pairing between a reference set and an estimated set.
#[derive(Debug, Clone)]
pub struct Matching {
    /// `permutation[i]` is the estimate index matched to reference signal `i`.
    pub permutation: Vec<usize>,
    /// Aligning shift for each pair, as returned by [`shift_dist`].
    pub shifts: Vec<usize>,
    /// Per-pair shift-invariant distances.
    pub distances: Vec<f64>,
    /// Sum of squared per-pair distances.
    pub total_sq: f64,
}

/// `min_s ‖R_s x - y‖₂` over all L cyclic shifts, and the minimizing shift.
///
/// The maximizing shift of `⟨R_s x, y⟩` is found with one FFT
/// cross-correlation; the distance itself is then recomputed exactly in the
/// time domain at that shift, so identical inputs give exactly zero. Ties
/// pick the smallest shift index.
pub fn shift_dist(x: &Signal, y: &Signal) -> Result<(f64, usize)> {
    if x.len() != y.len() {
        return Err(Error::Dimension(format!(
            "shift_dist needs equal lengths, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let dft = Dft::new(x.len());
    shift_dist_with(&dft, x.values(), y.values())
}

pub(crate) fn shift_dist_with(dft: &Dft, x: &[f64], y: &[f64]) -> Result<(f64, usize)> {
    let corr = dft.cross_correlation(x, y);
    let mut best_s = 0;
    let mut best_c = corr[0];
    for (s, &c) in corr.iter().enumerate().skip(1) {
        if c > best_c {
            best_c = c;
            best_s = s;
        }
    }
    let l = x.len();
    let d_sq: f64 = (0..l)
        .map(|n| {
            let diff = x[(n + l - best_s) % l] - y[n];
            diff * diff
        })
        .sum();
    Ok((d_sq.sqrt(), best_s))
}

/// Brute-force counterpart of [`shift_dist`], enumerating all shifts
/// directly. Kept as an oracle for the FFT path.
pub fn shift_dist_brute(x: &Signal, y: &Signal) -> Result<(f64, usize)> {
    if x.len() != y.len() {
        return Err(Error::Dimension("shift_dist needs equal lengths".into()));
    }
    let l = x.len();
    let mut best = f64::INFINITY;
    let mut best_s = 0;
    for s in 0..l {
        let shifted = crate::features::cyclic_shift(x, s as i64);
        let d: f64 = shifted
            .values()
            .iter()
            .zip(y.values())
            .map(|(a, b)| (a - b).powi(2))
            .sum();
        if d < best {
            best = d;
            best_s = s;
        }
    }
    Ok((best.sqrt(), best_s))
}

fn pair_cost_matrix(reference: &SignalSet, estimate: &SignalSet) -> Result<Vec<Vec<f64>>> {
    if reference.k() != estimate.k() || reference.l() != estimate.l() {
        return Err(Error::Dimension(format!(
            "cannot match a {}x{} set against a {}x{} set",
            reference.k(),
            reference.l(),
            estimate.k(),
            estimate.l()
        )));
    }
    let dft = Dft::new(reference.l());
    let mut cost = vec![vec![0.0; estimate.k()]; reference.k()];
    for i in 0..reference.k() {
        for j in 0..estimate.k() {
            let (d, _) = shift_dist_with(&dft, reference.get(i).values(), estimate.get(j).values())?;
            cost[i][j] = d * d;
        }
    }
    Ok(cost)
}

fn matching_from_permutation(
    reference: &SignalSet,
    estimate: &SignalSet,
    permutation: Vec<usize>,
) -> Result<Matching> {
    let dft = Dft::new(reference.l());
    let mut shifts = Vec::with_capacity(permutation.len());
    let mut distances = Vec::with_capacity(permutation.len());
    let mut total_sq = 0.0;
    for (i, &j) in permutation.iter().enumerate() {
        let (d, s) = shift_dist_with(&dft, reference.get(i).values(), estimate.get(j).values())?;
        shifts.push(s);
        distances.push(d);
        total_sq += d * d;
    }
    Ok(Matching { permutation, shifts, distances, total_sq })
}

/// Exact minimizer of `Σ_k shift_dist(x_k, x̃_{π(k)})²` over permutations π.
///
/// Solved by the Hungarian algorithm, then refined so that among equal-cost
/// optima the lexicographically smallest permutation is returned.
pub fn match_sets(reference: &SignalSet, estimate: &SignalSet) -> Result<Matching> {
    let cost = pair_cost_matrix(reference, estimate)?;
    let k = cost.len();
    let (_, optimal_total) = solve_assignment(&cost);
    let tie_eps = 1e-9 * (1.0 + optimal_total.abs());

    // Fix rows one at a time to the smallest column that still allows an
    // optimal completion. K is small, so the repeated sub-assignments are
    // cheap.
    let mut fixed = vec![usize::MAX; k];
    let mut used = vec![false; k];
    let mut fixed_sum = 0.0;
    for i in 0..k {
        let free_cols: Vec<usize> = (0..k).filter(|&j| !used[j]).collect();
        for &j in &free_cols {
            let rest_cols: Vec<usize> = free_cols.iter().copied().filter(|&c| c != j).collect();
            let sub: Vec<Vec<f64>> = (i + 1..k)
                .map(|r| rest_cols.iter().map(|&c| cost[r][c]).collect())
                .collect();
            let sub_total = if sub.is_empty() { 0.0 } else { solve_assignment(&sub).1 };
            if fixed_sum + cost[i][j] + sub_total <= optimal_total + tie_eps {
                fixed[i] = j;
                used[j] = true;
                fixed_sum += cost[i][j];
                break;
            }
        }
        debug_assert_ne!(fixed[i], usize::MAX);
    }
    matching_from_permutation(reference, estimate, fixed)
}

/// Exhaustive counterpart of [`match_sets`] for `K ≤ 6`; testing oracle.
pub fn match_sets_brute(reference: &SignalSet, estimate: &SignalSet) -> Result<Matching> {
    let cost = pair_cost_matrix(reference, estimate)?;
    let k = cost.len();
    if k > 6 {
        return Err(Error::InvalidArgument(format!(
            "brute-force matching is limited to K <= 6, got {k}"
        )));
    }
    let mut perm: Vec<usize> = (0..k).collect();
    let mut best: Option<(f64, Vec<usize>)> = None;
    loop {
        let total: f64 = perm.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
        match &best {
            // Strict improvement only: permutations are visited in
            // lexicographic order, so ties keep the smaller one.
            Some((t, _)) if total >= *t => {}
            _ => best = Some((total, perm.clone())),
        }
        if !next_permutation(&mut perm) {
            break;
        }
    }
    let (_, permutation) = best.expect("K >= 1");
    matching_from_permutation(reference, estimate, permutation)
}

fn next_permutation(v: &mut [usize]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// Shift- and permutation-invariant distance between two sets,
/// `sqrt(min_π Σ_k dist(x_k, x̃_{π(k)})²)`.
pub fn set_dist(reference: &SignalSet, estimate: &SignalSet) -> Result<f64> {
    Ok(match_sets(reference, estimate)?.total_sq.sqrt())
}

/// `set_dist` normalized by the total reference energy,
/// `dist(x, x̃) / sqrt(Σ_k ‖x_k‖²)`.
pub fn relative_error(reference: &SignalSet, estimate: &SignalSet) -> Result<f64> {
    let energy = reference.total_energy();
    if energy <= 0.0 {
        return Err(Error::InvalidArgument(
            "relative error is undefined for an all-zero reference set".into(),
        ));
    }
    Ok(set_dist(reference, estimate)? / energy.sqrt())
}

/// Total variation distance `½ Σ_k |w_k − w̃_{π(k)}|` between matched
/// mixing weights. Always in `[0, 1]`.
pub fn tv_dist(w: &MixingWeights, w_est: &MixingWeights, permutation: &[usize]) -> Result<f64> {
    if w.k() != w_est.k() || permutation.len() != w.k() {
        return Err(Error::Dimension("tv_dist needs matching K".into()));
    }
    let mut seen = vec![false; w.k()];
    for &j in permutation {
        if j >= w.k() || seen[j] {
            return Err(Error::InvalidArgument("permutation is not a bijection".into()));
        }
        seen[j] = true;
    }
    let sum: f64 = w
        .values()
        .iter()
        .enumerate()
        .map(|(k, &wk)| (wk - w_est.values()[permutation[k]]).abs())
        .sum();
    Ok(0.5 * sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::cyclic_shift;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_set(k: usize, l: usize, seed: u64) -> SignalSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        SignalSet::from_rows(
            (0..k)
                .map(|_| (0..l).map(|_| StandardNormal.sample(&mut rng)).collect())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn shift_dist_examples() {
        let a = Signal::new(vec![1.0, 0.0, 0.0]).unwrap();
        let b = Signal::new(vec![0.0, 1.0, 0.0]).unwrap();
        let (d, s) = shift_dist(&a, &b).unwrap();
        assert!(d < 1e-12);
        assert_eq!(s, 1);

        let a = Signal::new(vec![1.0, 0.0]).unwrap();
        let b = Signal::new(vec![0.0, 2.0]).unwrap();
        let (d, s) = shift_dist(&a, &b).unwrap();
        assert!((d - 1.0).abs() < 1e-12);
        assert_eq!(s, 1);

        let x = Signal::new(vec![0.3, -1.2, 0.7, 2.0]).unwrap();
        let (d, s) = shift_dist(&x, &x).unwrap();
        assert!(d < 1e-12);
        assert_eq!(s, 0);
    }

    #[test]
    fn shift_dist_is_symmetric_and_shift_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for &l in &[3usize, 8, 15] {
            let x = Signal::new((0..l).map(|_| StandardNormal.sample(&mut rng)).collect()).unwrap();
            let y = Signal::new((0..l).map(|_| StandardNormal.sample(&mut rng)).collect()).unwrap();
            let (dxy, _) = shift_dist(&x, &y).unwrap();
            let (dyx, _) = shift_dist(&y, &x).unwrap();
            assert!((dxy - dyx).abs() < 1e-12);
            for a in 0..l as i64 {
                for b in 0..l as i64 {
                    let (d, _) = shift_dist(&cyclic_shift(&x, a), &cyclic_shift(&y, b)).unwrap();
                    assert!((d - dxy).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn fft_path_agrees_with_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for &l in &[2usize, 5, 16, 31] {
            for _ in 0..20 {
                let x = Signal::new((0..l).map(|_| StandardNormal.sample(&mut rng)).collect()).unwrap();
                let y = Signal::new((0..l).map(|_| StandardNormal.sample(&mut rng)).collect()).unwrap();
                let (d_fft, s_fft) = shift_dist(&x, &y).unwrap();
                let (d_bf, s_bf) = shift_dist_brute(&x, &y).unwrap();
                assert_eq!(s_fft, s_bf);
                assert!((d_fft - d_bf).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn matching_recovers_reorder_and_shift() {
        let set = random_set(3, 9, 4);
        let reordered = SignalSet::new(vec![
            cyclic_shift(set.get(2), 4),
            cyclic_shift(set.get(0), 1),
            cyclic_shift(set.get(1), 7),
        ])
        .unwrap();
        let m = match_sets(&set, &reordered).unwrap();
        assert_eq!(m.permutation, vec![1, 2, 0]);
        assert!(m.total_sq < 1e-20);
    }

    #[test]
    fn hungarian_matching_agrees_with_enumeration() {
        for k in 1..=6 {
            for trial in 0..8 {
                let a = random_set(k, 7, 100 + trial);
                let b = random_set(k, 7, 200 + trial * 31 + k as u64);
                let fast = match_sets(&a, &b).unwrap();
                let brute = match_sets_brute(&a, &b).unwrap();
                assert_eq!(fast.permutation, brute.permutation, "k={k} trial={trial}");
                assert!((fast.total_sq - brute.total_sq).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn single_signal_matching_is_identity() {
        let a = random_set(1, 6, 9);
        let b = random_set(1, 6, 10);
        let m = match_sets(&a, &b).unwrap();
        assert_eq!(m.permutation, vec![0]);
    }

    #[test]
    fn relative_error_examples() {
        let set = random_set(2, 8, 77);
        assert!(relative_error(&set, &set).unwrap() < 1e-12);

        let zeros = SignalSet::from_rows(vec![vec![0.0; 8]; 2]).unwrap();
        assert!((relative_error(&set, &zeros).unwrap() - 1.0).abs() < 1e-12);
        assert!(relative_error(&zeros, &set).is_err());

        let a = SignalSet::from_rows(vec![vec![1.0, 0.0]]).unwrap();
        let b = SignalSet::from_rows(vec![vec![0.0, 2.0]]).unwrap();
        assert!((relative_error(&a, &b).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tv_dist_examples() {
        let w = MixingWeights::new(vec![0.5, 0.5]).unwrap();
        let v = MixingWeights::new(vec![0.7, 0.3]).unwrap();
        assert!((tv_dist(&w, &v, &[0, 1]).unwrap() - 0.2).abs() < 1e-12);
        assert_eq!(tv_dist(&w, &w, &[0, 1]).unwrap(), 0.0);

        let a = MixingWeights::new(vec![1.0, 0.0]).unwrap();
        let b = MixingWeights::new(vec![0.0, 1.0]).unwrap();
        assert_eq!(tv_dist(&a, &b, &[1, 0]).unwrap(), 0.0);
        assert!((tv_dist(&a, &b, &[0, 1]).unwrap() - 1.0).abs() < 1e-12);
        assert!(tv_dist(&a, &b, &[0, 0]).is_err());
    }
}
