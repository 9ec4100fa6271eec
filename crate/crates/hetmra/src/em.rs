//! Expectation-maximization baseline over the latent (shift, class) pairs.
//!
//! The E-step computes, for each observation, a posterior over all `L·K`
//! (shift, class) combinations; the M-step updates each signal as a
//! responsibility-weighted average of back-shifted observations, shrunk by
//! a Gaussian prior `N(0, σ0²I)`:
//!
//! ```text
//! x̃_k ← Σ_{j,r} w_{j,r,k} R_r⁻¹ y_j / (σ²/σ0² + Σ_{j,r} w_{j,r,k})
//! ```
//!
//! Unlike the invariant-feature pipeline, EM revisits every observation on
//! every iteration. Responsibilities are computed per observation on the
//! fly and folded into `O(KL)` accumulators, never materialized for the
//! whole data set; the shift sums use FFT cross-correlations.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::estimate::Estimate;
use crate::metrics::set_dist;
use crate::{Dft, Error, MixingWeights, Result, SignalSet};

#[derive(Debug, Clone)]
pub struct EmConfig {
    /// Noise level of the observations; must be positive.
    pub sigma: f64,
    /// Prior variance on the signals.
    pub sigma0_sq: f64,
    pub max_iter: u64,
    /// Convergence threshold per class: stop when successive signal sets
    /// differ by less than `K · conv_tol_per_k` in the shift- and
    /// permutation-invariant metric.
    pub conv_tol_per_k: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl EmConfig {
    pub fn new(sigma: f64) -> Result<Self> {
        if !sigma.is_finite() || sigma <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "EM needs sigma > 0 (the posterior over shifts degenerates at 0), got {sigma}"
            )));
        }
        Ok(EmConfig {
            sigma,
            sigma0_sq: 1.0,
            max_iter: 10_000,
            conv_tol_per_k: 1e-5,
            batch_size: 1024,
            seed: 0,
        })
    }
}

/// Posterior over the `L·K` (shift, class) pairs for one observation.
#[derive(Debug, Clone)]
pub struct Responsibilities {
    l: usize,
    k: usize,
    /// Row-major by shift: `data[r*K + k]`.
    data: Vec<f64>,
}

impl Responsibilities {
    pub fn at(&self, shift: usize, class: usize) -> f64 {
        self.data[shift * self.k + class]
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Total mass per class.
    pub fn class_mass(&self) -> Vec<f64> {
        let mut mass = vec![0.0; self.k];
        for r in 0..self.l {
            for (k, m) in mass.iter_mut().enumerate() {
                *m += self.data[r * self.k + k];
            }
        }
        mass
    }
}

/// `w_{r,k} ∝ exp(−‖R_r x̃_k − y‖²/(2σ²))`, normalized over all `(r, k)`.
///
/// Exponents are shifted by their maximum before exponentiation, so small
/// `σ` concentrates mass instead of underflowing to all zeros.
pub fn responsibilities(y: &[f64], signals: &SignalSet, sigma: f64) -> Result<Responsibilities> {
    if sigma <= 0.0 {
        return Err(Error::InvalidArgument("responsibilities need sigma > 0".into()));
    }
    if y.len() != signals.l() {
        return Err(Error::Dimension(format!(
            "observation of length {} against L={} signals",
            y.len(),
            signals.l()
        )));
    }
    let dft = Dft::new(signals.l());
    let spectra: Vec<Vec<Complex64>> =
        signals.iter().map(|x| dft.forward_real(x.values())).collect();
    let norms: Vec<f64> = signals.iter().map(|x| x.norm().powi(2)).collect();
    let mut scratch = EStepScratch::new(signals.l(), signals.k());
    scratch.load_observation(&dft, y);
    scratch.exponents(&dft, &spectra, &norms, sigma);
    let (data, _) = scratch.normalized();
    Ok(Responsibilities { l: signals.l(), k: signals.k(), data })
}

/// Result of one EM iteration.
#[derive(Debug, Clone)]
pub struct EmStep {
    pub signals: SignalSet,
    /// Classes whose update denominator (almost) vanished this iteration;
    /// their signals were left unchanged.
    pub starved: Vec<u32>,
    /// Responsibility mass per class, summed over observations.
    pub mass: Vec<f64>,
}

/// Per-class accumulators for one pass over the data: the weighted
/// back-shifted sums in the frequency domain, and the responsibility mass.
struct MStepAccumulator {
    num_hat: Vec<Vec<Complex64>>,
    mass: Vec<f64>,
}

impl MStepAccumulator {
    fn new(l: usize, k: usize) -> Self {
        MStepAccumulator {
            num_hat: vec![vec![Complex64::new(0.0, 0.0); l]; k],
            mass: vec![0.0; k],
        }
    }

    fn merge(&mut self, other: &MStepAccumulator) {
        for (a, b) in self.num_hat.iter_mut().zip(&other.num_hat) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        for (a, b) in self.mass.iter_mut().zip(&other.mass) {
            *a += b;
        }
    }
}

/// Reused per-observation buffers for the E-step.
struct EStepScratch {
    l: usize,
    k: usize,
    y_spec: Vec<Complex64>,
    corr: Vec<Complex64>,
    /// Exponents, row-major by shift.
    exps: Vec<f64>,
    resp_spec: Vec<Complex64>,
}

impl EStepScratch {
    fn new(l: usize, k: usize) -> Self {
        EStepScratch {
            l,
            k,
            y_spec: vec![Complex64::new(0.0, 0.0); l],
            corr: vec![Complex64::new(0.0, 0.0); l],
            exps: vec![0.0; l * k],
            resp_spec: vec![Complex64::new(0.0, 0.0); l],
        }
    }

    fn load_observation(&mut self, dft: &Dft, y: &[f64]) {
        for (s, &v) in self.y_spec.iter_mut().zip(y) {
            *s = Complex64::new(v, 0.0);
        }
        dft.forward(&mut self.y_spec);
    }

    /// Fills `exps[r*K + k] = (2⟨R_r x̃_k, y⟩ − ‖x̃_k‖²)/(2σ²)`; the common
    /// `−‖y‖²/(2σ²)` offset cancels in the normalization.
    fn exponents(&mut self, dft: &Dft, spectra: &[Vec<Complex64>], norms: &[f64], sigma: f64) {
        let inv_two_sigma_sq = 1.0 / (2.0 * sigma * sigma);
        for (k, spectrum) in spectra.iter().enumerate() {
            for (c, (s, y)) in self.corr.iter_mut().zip(spectrum.iter().zip(&self.y_spec)) {
                *c = s.conj() * y;
            }
            dft.inverse(&mut self.corr);
            for r in 0..self.l {
                self.exps[r * self.k + k] = (2.0 * self.corr[r].re - norms[k]) * inv_two_sigma_sq;
            }
        }
    }

    /// Normalized responsibilities and their per-class mass.
    fn normalized(&self) -> (Vec<f64>, Vec<f64>) {
        let max = self.exps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut data: Vec<f64> = self.exps.iter().map(|e| (e - max).exp()).collect();
        let z: f64 = data.iter().sum();
        let mut mass = vec![0.0; self.k];
        for (i, v) in data.iter_mut().enumerate() {
            *v /= z;
            mass[i % self.k] += *v;
        }
        (data, mass)
    }

    /// Folds this observation's responsibilities into the accumulator.
    fn accumulate(&mut self, dft: &Dft, resp: &[f64], mass: &[f64], acc: &mut MStepAccumulator) {
        for k in 0..self.k {
            for r in 0..self.l {
                self.resp_spec[r] = Complex64::new(resp[r * self.k + k], 0.0);
            }
            dft.forward(&mut self.resp_spec);
            for (dst, (w, y)) in acc.num_hat[k]
                .iter_mut()
                .zip(self.resp_spec.iter().zip(&self.y_spec))
            {
                *dst += w.conj() * y;
            }
            acc.mass[k] += mass[k];
        }
    }
}

fn accumulate_batch(
    dft: &Dft,
    batch: &[Vec<f64>],
    spectra: &[Vec<Complex64>],
    norms: &[f64],
    sigma: f64,
    l: usize,
    k: usize,
) -> MStepAccumulator {
    let mut acc = MStepAccumulator::new(l, k);
    let mut scratch = EStepScratch::new(l, k);
    for y in batch {
        scratch.load_observation(dft, y);
        scratch.exponents(dft, spectra, norms, sigma);
        let (resp, mass) = scratch.normalized();
        scratch.accumulate(dft, &resp, &mass, &mut acc);
    }
    acc
}

/// One EM iteration over the full data set, streamed in batches.
///
/// Batch accumulators are merged in batch order, so the result does not
/// depend on the number of worker threads.
pub fn em_step(observations: &[Vec<f64>], signals: &SignalSet, cfg: &EmConfig) -> Result<EmStep> {
    let l = signals.l();
    let k = signals.k();
    if observations.is_empty() {
        return Err(Error::InvalidArgument("EM needs at least one observation".into()));
    }
    if let Some(bad) = observations.iter().find(|y| y.len() != l) {
        return Err(Error::Dimension(format!(
            "observation of length {} against L={l} signals",
            bad.len()
        )));
    }
    let dft = Dft::new(l);
    let spectra: Vec<Vec<Complex64>> =
        signals.iter().map(|x| dft.forward_real(x.values())).collect();
    let norms: Vec<f64> = signals.iter().map(|x| x.norm().powi(2)).collect();

    let batches: Vec<&[Vec<f64>]> = observations.chunks(cfg.batch_size.max(1)).collect();
    #[cfg(feature = "parallel")]
    let partials: Vec<MStepAccumulator> = {
        use rayon::prelude::*;
        batches
            .par_iter()
            .map(|batch| accumulate_batch(&dft, batch, &spectra, &norms, cfg.sigma, l, k))
            .collect()
    };
    #[cfg(not(feature = "parallel"))]
    let partials: Vec<MStepAccumulator> = batches
        .iter()
        .map(|batch| accumulate_batch(&dft, batch, &spectra, &norms, cfg.sigma, l, k))
        .collect();

    let mut acc = MStepAccumulator::new(l, k);
    for p in &partials {
        acc.merge(p);
    }

    let shrinkage = cfg.sigma * cfg.sigma / cfg.sigma0_sq;
    let mut rows = Vec::with_capacity(k);
    let mut starved = Vec::new();
    for c in 0..k {
        let denominator = shrinkage + acc.mass[c];
        if denominator < 1e-12 {
            starved.push(c as u32);
            rows.push(signals.get(c).values().to_vec());
        } else {
            let mut num = std::mem::take(&mut acc.num_hat[c]);
            dft.inverse(&mut num);
            rows.push(num.iter().map(|v| v.re / denominator).collect());
        }
    }
    Ok(EmStep { signals: SignalSet::from_rows(rows)?, starved, mass: acc.mass })
}

/// Full EM run: random `N(0, σ0²)` initialization, iterate [`em_step`]
/// until successive iterates differ by less than `K · conv_tol_per_k` in
/// the shift-and-permutation-invariant metric or the iteration cap is hit.
///
/// The returned weights are the empirical responsibility mass per class at
/// the final iteration — a diagnostic, not an estimator of the mixing
/// probabilities.
pub fn run_em(observations: &[Vec<f64>], k: usize, cfg: &EmConfig) -> Result<Estimate> {
    if k < 1 {
        return Err(Error::InvalidArgument("need K >= 1".into()));
    }
    let Some(first) = observations.first() else {
        return Err(Error::InvalidArgument("EM needs at least one observation".into()));
    };
    let l = first.len();
    if l < 2 {
        return Err(Error::InvalidArgument("observations must have L >= 2".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let sigma0 = cfg.sigma0_sq.sqrt();
    let mut signals = SignalSet::from_rows(
        (0..k)
            .map(|_| {
                (0..l)
                    .map(|_| {
                        let e: f64 = StandardNormal.sample(&mut rng);
                        sigma0 * e
                    })
                    .collect()
            })
            .collect(),
    )?;

    let mut iterations = 0;
    let mut converged = false;
    let mut starved: Vec<u32> = Vec::new();
    let mut mass = vec![0.0; k];
    while iterations < cfg.max_iter {
        let step = em_step(observations, &signals, cfg)?;
        iterations += 1;
        for s in &step.starved {
            if !starved.contains(s) {
                starved.push(*s);
            }
        }
        mass = step.mass.clone();
        let moved = set_dist(&signals, &step.signals)?;
        signals = step.signals;
        if moved < k as f64 * cfg.conv_tol_per_k {
            converged = true;
            break;
        }
    }

    let total: f64 = mass.iter().sum();
    let weights = if total > 0.0 {
        MixingWeights::new(mass.iter().map(|m| m / total).collect())
            .unwrap_or(MixingWeights::uniform(k)?)
    } else {
        MixingWeights::uniform(k)?
    };
    starved.sort_unstable();
    Ok(Estimate {
        signals,
        weights,
        cost: None,
        grad_norm: None,
        iterations,
        restart_index: 0,
        converged,
        starved,
    })
}

/// Prior-regularized data log-posterior (up to an additive constant):
/// `Σ_j log Σ_{r,k} exp(−‖R_r x̃_k − y_j‖²/(2σ²)) − Σ_k ‖x̃_k‖²/(2σ0²)`.
///
/// EM ascends this quantity; tests assert the monotonicity.
pub fn log_posterior(observations: &[Vec<f64>], signals: &SignalSet, cfg: &EmConfig) -> Result<f64> {
    let l = signals.l();
    let dft = Dft::new(l);
    let spectra: Vec<Vec<Complex64>> =
        signals.iter().map(|x| dft.forward_real(x.values())).collect();
    let norms: Vec<f64> = signals.iter().map(|x| x.norm().powi(2)).collect();
    let mut scratch = EStepScratch::new(l, signals.k());
    let inv_two_sigma_sq = 1.0 / (2.0 * cfg.sigma * cfg.sigma);
    let mut total = 0.0;
    for y in observations {
        if y.len() != l {
            return Err(Error::Dimension("observation length mismatch".into()));
        }
        scratch.load_observation(&dft, y);
        scratch.exponents(&dft, &spectra, &norms, cfg.sigma);
        let y_norm_sq: f64 = y.iter().map(|v| v * v).sum();
        let max = scratch.exps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = scratch.exps.iter().map(|e| (e - max).exp()).sum();
        total += max + z.ln() - y_norm_sq * inv_two_sigma_sq;
    }
    let prior: f64 = signals.iter().map(|x| x.norm().powi(2)).sum::<f64>() / (2.0 * cfg.sigma0_sq);
    Ok(total - prior)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::cyclic_shift;
    use crate::metrics::relative_error;
    use crate::simulate::{collect_observations, generate_signals, GroundTruth};

    /// Direct-sum (no FFT) responsibilities for the oracle tests.
    fn responsibilities_brute(y: &[f64], signals: &SignalSet, sigma: f64) -> Vec<f64> {
        let l = signals.l();
        let k = signals.k();
        let mut exps = vec![0.0; l * k];
        for c in 0..k {
            for r in 0..l {
                let shifted = cyclic_shift(signals.get(c), r as i64);
                let d: f64 = shifted
                    .values()
                    .iter()
                    .zip(y)
                    .map(|(a, b)| (a - b).powi(2))
                    .sum();
                exps[r * k + c] = -d / (2.0 * sigma * sigma);
            }
        }
        let max = exps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut w: Vec<f64> = exps.iter().map(|e| (e - max).exp()).collect();
        let z: f64 = w.iter().sum();
        for v in w.iter_mut() {
            *v /= z;
        }
        w
    }

    #[test]
    fn exact_observation_concentrates_mass() {
        let signals = generate_signals(2, 8, 3).unwrap();
        let y = signals.get(0).values().to_vec();
        let resp = responsibilities(&y, &signals, 0.01).unwrap();
        assert!(resp.at(0, 0) > 0.999, "mass at (0,0) is {}", resp.at(0, 0));
    }

    #[test]
    fn all_zero_inputs_give_uniform_posterior() {
        let signals = SignalSet::from_rows(vec![vec![0.0; 5]; 3]).unwrap();
        let resp = responsibilities(&[0.0; 5], &signals, 1.0).unwrap();
        let expect = 1.0 / 15.0;
        for r in 0..5 {
            for k in 0..3 {
                assert!((resp.at(r, k) - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn responsibilities_normalize_and_match_brute_force() {
        let signals = generate_signals(3, 7, 11).unwrap();
        let truth =
            GroundTruth::new(signals.clone(), MixingWeights::uniform(3).unwrap(), 0.8).unwrap();
        for obs in collect_observations(&truth, 25, 4).unwrap() {
            let fast = responsibilities(&obs.y, &signals, 0.8).unwrap();
            let brute = responsibilities_brute(&obs.y, &signals, 0.8);
            let mut sum = 0.0;
            for r in 0..7 {
                for k in 0..3 {
                    sum += fast.at(r, k);
                    assert!((fast.at(r, k) - brute[r * 3 + k]).abs() < 1e-10);
                    assert!(fast.at(r, k) >= 0.0);
                }
            }
            assert!((sum - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sigma_zero_is_rejected() {
        let signals = generate_signals(1, 4, 0).unwrap();
        assert!(responsibilities(&[0.0; 4], &signals, 0.0).is_err());
        assert!(EmConfig::new(0.0).is_err());
    }

    #[test]
    fn defaults_match_protocol() {
        let cfg = EmConfig::new(1.0).unwrap();
        assert_eq!(cfg.sigma0_sq, 1.0);
        assert_eq!(cfg.max_iter, 10_000);
        assert_eq!(cfg.conv_tol_per_k, 1e-5);
    }

    #[test]
    fn streamed_update_matches_dense_oracle() {
        // Materialize all responsibilities and apply the update formula
        // directly; the streamed FFT path must agree.
        let l = 6;
        let k = 2;
        let signals = generate_signals(k, l, 5).unwrap();
        let truth =
            GroundTruth::new(signals.clone(), MixingWeights::uniform(k).unwrap(), 0.7).unwrap();
        let obs: Vec<Vec<f64>> = collect_observations(&truth, 100, 9)
            .unwrap()
            .into_iter()
            .map(|o| o.y)
            .collect();
        let guess = generate_signals(k, l, 77).unwrap();
        let mut cfg = EmConfig::new(0.7).unwrap();
        cfg.batch_size = 7; // exercise the batch merge

        let step = em_step(&obs, &guess, &cfg).unwrap();

        let shrinkage = cfg.sigma * cfg.sigma / cfg.sigma0_sq;
        for c in 0..k {
            let mut num = vec![0.0; l];
            let mut mass = 0.0;
            for y in &obs {
                let resp = responsibilities_brute(y, &guess, cfg.sigma);
                for r in 0..l {
                    let w = resp[r * k + c];
                    mass += w;
                    for n in 0..l {
                        num[n] += w * y[(n + r) % l];
                    }
                }
            }
            let denom = shrinkage + mass;
            for n in 0..l {
                let expect = num[n] / denom;
                let got = step.signals.get(c).values()[n];
                assert!((got - expect).abs() < 1e-10, "class {c} entry {n}: {got} vs {expect}");
            }
            assert!((step.mass[c] - mass).abs() < 1e-8);
        }
    }

    #[test]
    fn concentrated_responsibilities_recover_aligned_average() {
        // K=1, near-zero noise on the data, huge prior variance: the update
        // is the plain average of the aligned observations.
        let l = 8;
        let signals = generate_signals(1, l, 21).unwrap();
        let truth =
            GroundTruth::new(signals.clone(), MixingWeights::uniform(1).unwrap(), 0.0).unwrap();
        let obs: Vec<Vec<f64>> = collect_observations(&truth, 40, 2)
            .unwrap()
            .into_iter()
            .map(|o| o.y)
            .collect();
        let mut cfg = EmConfig::new(0.01).unwrap();
        cfg.sigma0_sq = 1e12;
        let step = em_step(&obs, &signals, &cfg).unwrap();
        // Noiseless data and the true signal as the guess: the average of
        // perfectly aligned observations is the signal itself.
        for n in 0..l {
            let got = step.signals.get(0).values()[n];
            let expect = signals.get(0).values()[n];
            assert!((got - expect).abs() < 1e-8, "{got} vs {expect}");
        }
    }

    #[test]
    fn vanishing_denominator_is_flagged_as_starved() {
        // sigma²/sigma0² below 1e-12 and (numerically) zero responsibility
        // mass for the far-away class.
        let l = 6;
        let mut rows = vec![vec![0.0; l]; 2];
        rows[0][0] = 1.0;
        rows[1] = vec![1e9; l]; // so far away that its mass underflows
        let guess = SignalSet::from_rows(rows).unwrap();
        let obs = vec![vec![0.1, 0.0, 0.0, 0.0, 0.0, 0.0]; 5];
        let mut cfg = EmConfig::new(1e-7).unwrap();
        cfg.sigma0_sq = 1.0;
        let step = em_step(&obs, &guess, &cfg).unwrap();
        assert_eq!(step.starved, vec![1]);
        // The starved signal is carried over unchanged.
        assert_eq!(step.signals.get(1).values(), guess.get(1).values());
    }

    #[test]
    fn high_snr_homogeneous_run_recovers_the_signal() {
        let l = 10;
        let signals = generate_signals(1, l, 33).unwrap();
        let truth =
            GroundTruth::new(signals.clone(), MixingWeights::uniform(1).unwrap(), 0.1).unwrap();
        let obs: Vec<Vec<f64>> = collect_observations(&truth, 1000, 6)
            .unwrap()
            .into_iter()
            .map(|o| o.y)
            .collect();
        let mut cfg = EmConfig::new(0.1).unwrap();
        cfg.seed = 4;
        let est = run_em(&obs, 1, &cfg).unwrap();
        assert!(est.converged);
        let err = relative_error(&signals, &est.signals).unwrap();
        assert!(err < 0.05, "relative error {err}");
    }

    #[test]
    fn log_posterior_is_nondecreasing_across_iterations() {
        let l = 6;
        let k = 2;
        let signals = generate_signals(k, l, 8).unwrap();
        let truth =
            GroundTruth::new(signals, MixingWeights::uniform(k).unwrap(), 1.0).unwrap();
        let obs: Vec<Vec<f64>> = collect_observations(&truth, 60, 3)
            .unwrap()
            .into_iter()
            .map(|o| o.y)
            .collect();
        let cfg = EmConfig::new(1.0).unwrap();
        let mut current = generate_signals(k, l, 50).unwrap();
        let mut previous = log_posterior(&obs, &current, &cfg).unwrap();
        for _ in 0..30 {
            current = em_step(&obs, &current, &cfg).unwrap().signals;
            let next = log_posterior(&obs, &current, &cfg).unwrap();
            assert!(next >= previous - 1e-9, "posterior dropped: {next} < {previous}");
            previous = next;
        }
    }
}
