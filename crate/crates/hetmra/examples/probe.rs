use hetmra::metrics::relative_error;
use hetmra::moments::analytic_features;
use hetmra::simulate::generate_signals;
use hetmra::solver::{multi_start, SolveOptions, WeightsSpec};
use hetmra::MixingWeights;
use std::time::Instant;

fn main() {
    for &(l, k) in &[(9usize, 3usize), (16, 4), (25, 5), (6, 4)] {
        let signals = generate_signals(k, l, 1000 + l as u64).unwrap();
        let weights = MixingWeights::uniform(k).unwrap();
        let f = analytic_features(&signals, &weights, 0.0).unwrap();
        let opts = SolveOptions {
            weights: WeightsSpec::Fixed(weights),
            seed: 42,
            ..Default::default()
        };
        let t0 = Instant::now();
        let out = multi_start(&f, k, 30, &opts).unwrap();
        let elapsed = t0.elapsed().as_secs_f64();
        let n_global = out.global_flags.iter().filter(|&&g| g).count();
        let mut worst_err: f64 = 0.0;
        let mut errs = vec![];
        for (i, &flag) in out.global_flags.iter().enumerate() {
            if flag {
                let run_opts = SolveOptions {
                    seed: hetmra::derive_seed(42, i as u64),
                    ..opts.clone()
                };
                let est = hetmra::solver::solve(&f, k, &run_opts).unwrap();
                let err = relative_error(&signals, &est.signals).unwrap();
                errs.push(err);
                if err > worst_err {
                    worst_err = err;
                }
            }
        }
        let best = out.all_costs.iter().cloned().fold(f64::INFINITY, f64::min);
        println!(
            "L={l} K={k}: global {n_global}/30, best cost {best:.3e}, worst global err {worst_err:.3e}, {elapsed:.1}s"
        );
        let min_err = errs.iter().cloned().fold(f64::INFINITY, f64::min);
        println!("    min global err {min_err:.3e}");
    }
}
