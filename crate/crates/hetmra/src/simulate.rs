//! Synthetic data generation: ground-truth signals, mixing weights, and
//! streams of noisy shifted observations.
//!
//! Every generator is deterministic given its seed. Observation streams are
//! generated sequentially from a single RNG, so the delivered data does not
//! depend on how it is split into batches.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::features::cyclic_shift;
use crate::metrics::shift_dist;
use crate::{Error, MixingWeights, Result, SignalSet};

/// The generating model: signals, mixing weights and noise level.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    signals: SignalSet,
    weights: MixingWeights,
    sigma: f64,
}

impl GroundTruth {
    /// Minimum pairwise shift-invariant distance for signals to count as
    /// distinct.
    pub const DISTINCTNESS_TOL: f64 = 1e-6;

    pub fn new(signals: SignalSet, weights: MixingWeights, sigma: f64) -> Result<Self> {
        if weights.k() != signals.k() {
            return Err(Error::Dimension(format!(
                "{} weights for {} signals",
                weights.k(),
                signals.k()
            )));
        }
        if !sigma.is_finite() || sigma < 0.0 {
            return Err(Error::InvalidArgument(format!("sigma must be >= 0, got {sigma}")));
        }
        for i in 0..signals.k() {
            for j in 0..i {
                let (d, _) = shift_dist(signals.get(i), signals.get(j))?;
                if d <= Self::DISTINCTNESS_TOL {
                    return Err(Error::InvalidArgument(format!(
                        "signals {j} and {i} coincide up to shift (distance {d:.2e})"
                    )));
                }
            }
        }
        Ok(GroundTruth { signals, weights, sigma })
    }

    pub fn signals(&self) -> &SignalSet {
        &self.signals
    }

    pub fn weights(&self) -> &MixingWeights {
        &self.weights
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn k(&self) -> usize {
        self.signals.k()
    }

    pub fn l(&self) -> usize {
        self.signals.l()
    }
}

/// One noisy shifted observation together with its latent labels.
///
/// The labels exist for evaluation only; estimators must not read them.
#[derive(Debug, Clone)]
pub struct Observation {
    pub y: Vec<f64>,
    pub shift: usize,
    pub class: usize,
}

/// `K` signals of length `L` with i.i.d. standard Gaussian entries.
pub fn generate_signals(k: usize, l: usize, seed: u64) -> Result<SignalSet> {
    if k < 1 || l < 2 {
        return Err(Error::InvalidArgument(format!(
            "need K >= 1 and L >= 2, got K={k}, L={l}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..k)
        .map(|_| (0..l).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect();
    SignalSet::from_rows(rows)
}

/// How mixing weights are produced.
#[derive(Debug, Clone)]
pub enum WeightsMode {
    /// `1/K` everywhere.
    Uniform,
    /// i.i.d. `U[0,1]` draws normalized to sum 1.
    Random,
    /// A user-supplied vector, validated against the simplex.
    Explicit(Vec<f64>),
}

pub fn generate_weights(k: usize, mode: WeightsMode, seed: u64) -> Result<MixingWeights> {
    if k < 1 {
        return Err(Error::InvalidArgument("need K >= 1".into()));
    }
    match mode {
        WeightsMode::Uniform => MixingWeights::uniform(k),
        WeightsMode::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let draws: Vec<f64> = (0..k).map(|_| rng.random::<f64>()).collect();
            let sum: f64 = draws.iter().sum();
            if sum <= 0.0 {
                return Err(Error::InvalidArgument("degenerate all-zero weight draw".into()));
            }
            MixingWeights::new(draws.into_iter().map(|v| v / sum).collect())
        }
        WeightsMode::Explicit(w) => {
            if w.len() != k {
                return Err(Error::Dimension(format!("{} entries for K={k}", w.len())));
            }
            MixingWeights::new(w)
        }
    }
}

/// Batched stream of observations `y_j = R_{r_j} x_{v_j} + ε_j`.
///
/// Classes are drawn from the mixing weights, shifts uniformly on
/// `{0..L-1}`, noise i.i.d. `N(0, σ²)`. The stream is produced by one
/// sequential RNG, so for a fixed seed the concatenation over batches is
/// identical for every batch size.
pub struct ObservationStream {
    truth: GroundTruth,
    cumulative_weights: Vec<f64>,
    rng: ChaCha8Rng,
    remaining: u64,
    batch_size: usize,
}

impl ObservationStream {
    pub fn new(truth: &GroundTruth, n: u64, seed: u64, batch_size: usize) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidArgument("need N >= 1".into()));
        }
        if batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be positive".into()));
        }
        let mut acc = 0.0;
        let cumulative_weights = truth
            .weights()
            .values()
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        Ok(ObservationStream {
            truth: truth.clone(),
            cumulative_weights,
            rng: ChaCha8Rng::seed_from_u64(seed),
            remaining: n,
            batch_size,
        })
    }

    pub fn remaining(&self) -> u64 {
        self.remaining
    }

    fn draw(&mut self) -> Observation {
        let l = self.truth.l();
        let u: f64 = self.rng.random();
        let class = self
            .cumulative_weights
            .iter()
            .position(|&c| u < c)
            .unwrap_or(self.truth.k() - 1);
        let shift = self.rng.random_range(0..l);
        let mut y = cyclic_shift(self.truth.signals().get(class), shift as i64).into_values();
        let sigma = self.truth.sigma();
        if sigma > 0.0 {
            for v in y.iter_mut() {
                let e: f64 = StandardNormal.sample(&mut self.rng);
                *v += sigma * e;
            }
        }
        Observation { y, shift, class }
    }
}

impl Iterator for ObservationStream {
    type Item = Vec<Observation>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.remaining == 0 {
            return None;
        }
        let take = (self.batch_size as u64).min(self.remaining) as usize;
        self.remaining -= take as u64;
        Some((0..take).map(|_| self.draw()).collect())
    }
}

/// All `n` observations in memory; convenience for tests and small runs.
pub fn collect_observations(truth: &GroundTruth, n: u64, seed: u64) -> Result<Vec<Observation>> {
    let stream = ObservationStream::new(truth, n, seed, 4096)?;
    let mut all = Vec::with_capacity(n as usize);
    for batch in stream {
        all.extend(batch);
    }
    Ok(all)
}
