use hetmra::em::{run_em, EmConfig};
use hetmra::metrics::relative_error;
use hetmra::moments::accumulate_batches_parallel;
use hetmra::simulate::{collect_observations, generate_signals, GroundTruth};
use hetmra::solver::{multi_start, SolveOptions};
use hetmra::MixingWeights;
use std::time::Instant;

fn main() {
    let (l, k, n) = (20usize, 2usize, 10_000u64);
    let mut good_em_01 = 0;
    let mut total = 0;
    for seed in 1u64..=10 {
        for sigma in [0.1f64, 1.0] {
            let signals = generate_signals(k, l, hetmra::derive_seed(seed, 1)).unwrap();
            let truth = GroundTruth::new(signals.clone(), MixingWeights::uniform(k).unwrap(), sigma).unwrap();
            let obs: Vec<Vec<f64>> = collect_observations(&truth, n, hetmra::derive_seed(seed, 2))
                .unwrap().into_iter().map(|o| o.y).collect();

            let t0 = Instant::now();
            let batches: Vec<Vec<Vec<f64>>> = obs.chunks(1024).map(|c| c.to_vec()).collect();
            let acc = accumulate_batches_parallel(l, sigma, &batches).unwrap();
            let f = acc.finalize().unwrap();
            let out = multi_start(&f, k, 2, &SolveOptions { seed: hetmra::derive_seed(seed, 3), ..Default::default() }).unwrap();
            let t_inv = t0.elapsed().as_secs_f64();
            let err_inv = relative_error(&signals, &out.best.signals).unwrap();

            let mut cfg = EmConfig::new(sigma).unwrap();
            cfg.seed = hetmra::derive_seed(seed, 4);
            let t1 = Instant::now();
            let em = run_em(&obs, k, &cfg).unwrap();
            let t_em = t1.elapsed().as_secs_f64();
            let err_em = relative_error(&signals, &em.signals).unwrap();

            println!(
                "seed {seed} sigma {sigma}: inv err {err_inv:.3e} ({:.0}ms), em err {err_em:.3e} ({:.0}ms, iters {}), ratio {:.1}",
                t_inv * 1e3, t_em * 1e3, em.iterations, t_em / t_inv
            );
            if sigma == 0.1 {
                total += 1;
                if err_em <= err_inv { good_em_01 += 1; }
            }
        }
    }
    println!("EM beats inv at sigma=0.1 in {good_em_01}/{total} seeds");
}
