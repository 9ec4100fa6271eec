use hetmra::moments::analytic_features;
use hetmra::simulate::generate_signals;
use hetmra::solver::{multi_start, SolveOptions, WeightsSpec};
use hetmra::MixingWeights;

fn main() {
    let (l, k) = (25usize, 5usize);
    for truth_seed in [500 + 25u64, 1025] {
        let signals = generate_signals(k, l, truth_seed).unwrap();
        let weights = MixingWeights::uniform(k).unwrap();
        let f = analytic_features(&signals, &weights, 0.0).unwrap();
        for init_scale in [0.25, 0.5, 1.0, 1.5, 2.5] {
            let opts = SolveOptions {
                weights: WeightsSpec::Fixed(weights.clone()),
                seed: 31,
                max_iter: 10000,
                init_scale,
                ..Default::default()
            };
            let out = multi_start(&f, k, 60, &opts).unwrap();
            let n_global = out.global_flags.iter().filter(|&&g| g).count();
            let best = out.all_costs.iter().cloned().fold(f64::INFINITY, f64::min);
            println!(
                "truth {truth_seed} init_scale {init_scale}: global {n_global}/60, best {best:.2e}"
            );
        }
    }
}
