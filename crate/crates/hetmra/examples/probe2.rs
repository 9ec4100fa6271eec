use hetmra::bounds::feature_count;
use hetmra::metrics::relative_error;
use hetmra::moments::analytic_features;
use hetmra::simulate::generate_signals;
use hetmra::solver::{solve, SolveOptions, WeightsSpec};
use hetmra::MixingWeights;

// Numerical rank of the feature-map Jacobian at a random point:
// columns = d(features)/d(signal entries), features flattened as
// (m1, m2, Re m3, Im m3). Rank < K*L means the fiber through the point is
// positive-dimensional and exact recovery is impossible.
fn jacobian_rank(l: usize, k: usize, seed: u64) -> usize {
    let w = MixingWeights::uniform(k).unwrap();
    let h = 1e-5;
    let flatten = |rows: &Vec<Vec<f64>>| -> Vec<f64> {
        let set = hetmra::SignalSet::from_rows(rows.clone()).unwrap();
        let f = analytic_features(&set, &w, 0.0).unwrap();
        let mut v = vec![f.m1];
        v.extend(&f.m2);
        for i in 0..l {
            for j in 0..l {
                v.push(f.m3.at(i, j).re);
                v.push(f.m3.at(i, j).im);
            }
        }
        v
    };
    let base = generate_signals(k, l, seed).unwrap().rows();
    let n = k * l;
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    for c in 0..k {
        for i in 0..l {
            let mut plus = base.clone();
            plus[c][i] += h;
            let mut minus = base.clone();
            minus[c][i] -= h;
            let fp = flatten(&plus);
            let fm = flatten(&minus);
            cols.push(fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * h)).collect());
        }
    }
    // Modified Gram-Schmidt rank count.
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let scale = cols
        .iter()
        .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0f64, f64::max);
    for mut c in cols {
        for b in &basis {
            let proj: f64 = c.iter().zip(b).map(|(x, y)| x * y).sum();
            for (ci, bi) in c.iter_mut().zip(b) {
                *ci -= proj * bi;
            }
        }
        let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1e-7 * scale {
            for ci in c.iter_mut() {
                *ci /= norm;
            }
            basis.push(c);
        }
    }
    basis.len()
}

fn main() {
    for &(l, k) in &[(9usize, 3usize), (16, 4), (25, 5), (6, 4), (36, 6)] {
        let fc = feature_count(l).unwrap();
        let rank = jacobian_rank(l, k, 7);
        println!(
            "L={l} K={k}: unknowns {}, distinct numbers {}, numerical rank {rank}",
            k * l,
            fc.total
        );
    }

    // Convergence diagnosis at (25,5) with a generous iteration budget.
    let (l, k) = (25usize, 5usize);
    let signals = generate_signals(k, l, 1025).unwrap();
    let weights = MixingWeights::uniform(k).unwrap();
    let f = analytic_features(&signals, &weights, 0.0).unwrap();
    for run in 0..6u64 {
        let opts = SolveOptions {
            weights: WeightsSpec::Fixed(weights.clone()),
            seed: hetmra::derive_seed(4242, run),
            max_iter: 30000,
            gtol: 1e-12,
            ..Default::default()
        };
        let t0 = std::time::Instant::now();
        let est = solve(&f, k, &opts).unwrap();
        let err = relative_error(&signals, &est.signals).unwrap();
        println!(
            "run {run}: cost {:.3e}, |g| {:.3e}, iters {}, converged {}, err {:.3e}, {:.2}s",
            est.cost.unwrap(),
            est.grad_norm.unwrap(),
            est.iterations,
            est.converged,
            err,
            t0.elapsed().as_secs_f64()
        );
    }
}
