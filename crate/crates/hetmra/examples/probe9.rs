use hetmra::em::{em_step, EmConfig};
use hetmra::moments::accumulate_batches_parallel;
use hetmra::simulate::{collect_observations, generate_signals, GroundTruth};
use hetmra::solver::{multi_start, SolveOptions};
use hetmra::MixingWeights;
use std::time::Instant;

fn main() {
    let (l, k, n) = (20usize, 2usize, 10_000u64);
    let sigma = 1.0;
    let signals = generate_signals(k, l, 11).unwrap();
    let truth = GroundTruth::new(signals.clone(), MixingWeights::uniform(k).unwrap(), sigma).unwrap();
    let obs: Vec<Vec<f64>> = collect_observations(&truth, n, 5).unwrap().into_iter().map(|o| o.y).collect();
    let batches: Vec<Vec<Vec<f64>>> = obs.chunks(1024).map(|c| c.to_vec()).collect();

    // Warm up the rayon pool.
    let _ = accumulate_batches_parallel(l, sigma, &batches).unwrap();

    for _ in 0..3 {
        let t0 = Instant::now();
        let acc = accumulate_batches_parallel(l, sigma, &batches).unwrap();
        let t_mom = t0.elapsed().as_secs_f64();
        let f = acc.finalize().unwrap();

        let t1 = Instant::now();
        let out = multi_start(&f, k, 2, &SolveOptions { seed: 77, ..Default::default() }).unwrap();
        let t_solve = t1.elapsed().as_secs_f64();

        let cfg = EmConfig::new(sigma).unwrap();
        let guess = generate_signals(k, l, 99).unwrap();
        let t2 = Instant::now();
        let step = em_step(&obs, &guess, &cfg).unwrap();
        let t_em_iter = t2.elapsed().as_secs_f64();
        let _ = step;

        println!(
            "moments {:.1}ms, solve {:.1}ms (iters {}), em per-iter {:.1}ms",
            t_mom * 1e3, t_solve * 1e3, out.best.iterations, t_em_iter * 1e3
        );
    }
}
