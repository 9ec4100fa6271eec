use hetmra::metrics::relative_error;
use hetmra::moments::analytic_features;
use hetmra::simulate::generate_signals;
use hetmra::solver::{multi_start, solve, SolveOptions, WeightsSpec};
use hetmra::MixingWeights;

fn main() {
    for &(l, k) in &[(36usize, 6usize), (49, 7), (49, 6), (64, 8)] {
        let signals = generate_signals(k, l, 500 + l as u64).unwrap();
        let weights = MixingWeights::uniform(k).unwrap();
        let f = analytic_features(&signals, &weights, 0.0).unwrap();
        let opts = SolveOptions {
            weights: WeightsSpec::Fixed(weights),
            seed: 9,
            max_iter: 20000,
            ..Default::default()
        };
        let t0 = std::time::Instant::now();
        let out = multi_start(&f, k, 30, &opts).unwrap();
        let n_global = out.global_flags.iter().filter(|&&g| g).count();
        let best = out.all_costs.iter().cloned().fold(f64::INFINITY, f64::min);
        let mut worst: f64 = 0.0;
        for (i, &flag) in out.global_flags.iter().enumerate() {
            if flag {
                let est = solve(&f, k, &SolveOptions { seed: hetmra::derive_seed(9, i as u64), ..opts.clone() }).unwrap();
                worst = worst.max(relative_error(&signals, &est.signals).unwrap());
            }
        }
        println!("L={l} K={k}: global {n_global}/30, best {best:.2e}, worst global err {worst:.2e}, {:.0}s", t0.elapsed().as_secs_f64());
    }
}
