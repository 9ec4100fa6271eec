use hetmra::moments::analytic_features;
use hetmra::simulate::generate_signals;
use hetmra::solver::{multi_start, SolveOptions, WeightsSpec};
use hetmra::MixingWeights;

fn main() {
    // Does a longer, tighter optimization or a different acceptance
    // threshold change anything at (25,5)? Also scan a neighborhood of
    // cells to place the empirical reliability boundary.
    for &(l, k) in &[
        (23usize, 5usize),
        (24, 5),
        (25, 5),
        (26, 5),
        (28, 5),
        (30, 5),
        (32, 5),
    ] {
        let signals = generate_signals(k, l, 500 + l as u64).unwrap();
        let weights = MixingWeights::uniform(k).unwrap();
        let f = analytic_features(&signals, &weights, 0.0).unwrap();
        let opts = SolveOptions {
            weights: WeightsSpec::Fixed(weights),
            seed: 9,
            max_iter: 20000,
            ..Default::default()
        };
        let out = multi_start(&f, k, 40, &opts).unwrap();
        let n_global = out.global_flags.iter().filter(|&&g| g).count();
        let best = out.all_costs.iter().cloned().fold(f64::INFINITY, f64::min);
        println!("L={l} K={k}: global {n_global}/40, best {best:.2e}");
    }
}
