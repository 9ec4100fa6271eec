use hetmra::em::{run_em, EmConfig};
use hetmra::metrics::relative_error;
use hetmra::simulate::{collect_observations, generate_signals, GroundTruth};
use hetmra::{derive_seed, MixingWeights};

fn main() {
    // EM failure rate at sigma = 0.1, L=20, K=2, N=1e4 across many seeds.
    let (l, k, n, sigma) = (20usize, 2usize, 10_000u64, 0.1f64);
    for base in [0xC7u64, 0xB1, 0xA2, 0x55, 0x1234] {
        let mut good = 0;
        let mut errs = Vec::new();
        for i in 0..5u64 {
            let seed = derive_seed(base, i);
            let signals = generate_signals(k, l, derive_seed(seed, 1)).unwrap();
            let truth = GroundTruth::new(signals.clone(), MixingWeights::uniform(k).unwrap(), sigma).unwrap();
            let obs: Vec<Vec<f64>> = collect_observations(&truth, n, derive_seed(seed, 2))
                .unwrap().into_iter().map(|o| o.y).collect();
            let mut cfg = EmConfig::new(sigma).unwrap();
            cfg.seed = derive_seed(seed, 4);
            let em = run_em(&obs, k, &cfg).unwrap();
            let err = relative_error(&signals, &em.signals).unwrap();
            errs.push(format!("{err:.1e}"));
            if err < 0.01 { good += 1; }
        }
        println!("base {base:#x}: {good}/5 good [{}]", errs.join(" "));
    }
}
