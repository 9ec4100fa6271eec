use hetmra::metrics::relative_error;
use hetmra::moments::analytic_features;
use hetmra::simulate::generate_signals;
use hetmra::solver::{multi_start, SolveOptions, WeightsSpec};
use hetmra::MixingWeights;

fn main() {
    let (l, k) = (25usize, 5usize);
    for truth_seed in [1025u64, 7, 99, 2024] {
        let signals = generate_signals(k, l, truth_seed).unwrap();
        let weights = MixingWeights::uniform(k).unwrap();
        let f = analytic_features(&signals, &weights, 0.0).unwrap();
        let opts = SolveOptions {
            weights: WeightsSpec::Fixed(weights),
            seed: truth_seed ^ 0xABCD,
            max_iter: 10000,
            ..Default::default()
        };
        let t0 = std::time::Instant::now();
        let out = multi_start(&f, k, 100, &opts).unwrap();
        let n_global = out.global_flags.iter().filter(|&&g| g).count();
        let best = out.all_costs.iter().cloned().fold(f64::INFINITY, f64::min);
        let err = relative_error(&signals, &out.best.signals).unwrap();
        println!(
            "truth {truth_seed}: global {n_global}/100, best cost {best:.2e}, best-est err {err:.2e}, {:.1}s",
            t0.elapsed().as_secs_f64()
        );
    }
}
