//! Single-pass, mergeable estimation of the mixed invariant features, and
//! their exact population limits.
//!
//! The accumulator keeps raw per-observation feature sums, so merging two
//! accumulators is componentwise addition and the only division happens at
//! [`MomentAccumulator::finalize`]. Memory is `O(L²)` per accumulator no
//! matter how many observations pass through.

use num_complex::Complex64;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::features::{bias_entry, bispectrum_from_spectrum};
use crate::{CMat, Dft, Error, MixingWeights, Result, SignalSet};

/// Number of observations behind a feature estimate, or the population
/// limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleCount {
    Finite(u64),
    Infinite,
}

impl Serialize for SampleCount {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            SampleCount::Finite(n) => serializer.serialize_u64(*n),
            SampleCount::Infinite => serializer.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for SampleCount {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(u64),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Number(n) => Ok(SampleCount::Finite(n)),
            Raw::Text(s) if s == "inf" => Ok(SampleCount::Infinite),
            Raw::Text(s) => Err(D::Error::custom(format!("expected a count or \"inf\", got {s:?}"))),
        }
    }
}

/// Averaged invariant features `(m1, m2, m3)` of a data set, together with
/// the noise level they were computed under.
#[derive(Debug, Clone)]
pub struct InvariantFeatures {
    pub l: usize,
    pub sigma: f64,
    pub n: SampleCount,
    pub m1: f64,
    pub m2: Vec<f64>,
    pub m3: CMat,
}

impl InvariantFeatures {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&FeaturesJson::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: FeaturesJson = serde_json::from_str(text)?;
        raw.validate()
    }
}

/// Wire format: complex entries split into real/imaginary matrices.
#[derive(Serialize, Deserialize)]
struct FeaturesJson {
    #[serde(rename = "L")]
    l: usize,
    sigma: f64,
    n: SampleCount,
    m1: f64,
    m2: Vec<f64>,
    m3_re: Vec<Vec<f64>>,
    m3_im: Vec<Vec<f64>>,
}

impl From<&InvariantFeatures> for FeaturesJson {
    fn from(f: &InvariantFeatures) -> Self {
        FeaturesJson {
            l: f.l,
            sigma: f.sigma,
            n: f.n,
            m1: f.m1,
            m2: f.m2.clone(),
            m3_re: f.m3.re_rows(),
            m3_im: f.m3.im_rows(),
        }
    }
}

impl FeaturesJson {
    fn validate(self) -> Result<InvariantFeatures> {
        if self.l < 2 {
            return Err(Error::Format(format!("features need L >= 2, got {}", self.l)));
        }
        if self.m2.len() != self.l {
            return Err(Error::Format(format!(
                "m2 has {} entries for L={}",
                self.m2.len(),
                self.l
            )));
        }
        let m3 = CMat::from_re_im(&self.m3_re, &self.m3_im)
            .filter(|m| m.n() == self.l)
            .ok_or_else(|| Error::Format("m3_re/m3_im are not L x L".into()))?;
        Ok(InvariantFeatures {
            l: self.l,
            sigma: self.sigma,
            n: self.n,
            m1: self.m1,
            m2: self.m2,
            m3,
        })
    }
}

/// Running sums of per-observation invariant features.
#[derive(Debug, Clone)]
pub struct MomentAccumulator {
    l: usize,
    sigma: f64,
    count: u64,
    sum_mean: f64,
    sum_power: Vec<f64>,
    sum_bispec: CMat,
    dft: Dft,
    scratch: Vec<Complex64>,
}

impl MomentAccumulator {
    /// `sigma` is the noise level the data was observed under; it is carried
    /// into the finalized features for the downstream inversion.
    pub fn new(l: usize, sigma: f64) -> Result<Self> {
        if l < 2 {
            return Err(Error::InvalidArgument(format!("need L >= 2, got {l}")));
        }
        if !sigma.is_finite() || sigma < 0.0 {
            return Err(Error::InvalidArgument(format!("sigma must be >= 0, got {sigma}")));
        }
        Ok(MomentAccumulator {
            l,
            sigma,
            count: 0,
            sum_mean: 0.0,
            sum_power: vec![0.0; l],
            sum_bispec: CMat::zeros(l),
            dft: Dft::new(l),
            scratch: vec![Complex64::new(0.0, 0.0); l],
        })
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    /// Absorbs one observation: `O(L log L)` for the DFT plus `O(L²)` for
    /// the bispectrum.
    pub fn accumulate(&mut self, y: &[f64]) -> Result<()> {
        if y.len() != self.l {
            return Err(Error::Dimension(format!(
                "observation of length {} into an L={} accumulator",
                y.len(),
                self.l
            )));
        }
        for (s, &v) in self.scratch.iter_mut().zip(y) {
            *s = Complex64::new(v, 0.0);
        }
        self.dft.forward(&mut self.scratch);
        let spectrum = &self.scratch;
        self.sum_mean += spectrum[0].re / self.l as f64;
        for (acc, s) in self.sum_power.iter_mut().zip(spectrum.iter()) {
            *acc += s.norm_sqr();
        }
        let l = self.l;
        let b = self.sum_bispec.as_mut_slice();
        for k in 0..l {
            let row = &mut b[k * l..(k + 1) * l];
            let sk = spectrum[k];
            // Split at j = k so that (j - k) mod L needs no per-cell modulo.
            for j in k..l {
                row[j] += sk * spectrum[j].conj() * spectrum[j - k];
            }
            for j in 0..k {
                row[j] += sk * spectrum[j].conj() * spectrum[j + l - k];
            }
        }
        self.count += 1;
        Ok(())
    }

    pub fn accumulate_batch<'a>(&mut self, batch: impl IntoIterator<Item = &'a [f64]>) -> Result<()> {
        for y in batch {
            self.accumulate(y)?;
        }
        Ok(())
    }

    /// Componentwise sum of two accumulators over the same `(L, sigma)`.
    pub fn merge(&mut self, other: &MomentAccumulator) -> Result<()> {
        if other.l != self.l {
            return Err(Error::Dimension(format!(
                "merging accumulators of L={} and L={}",
                self.l, other.l
            )));
        }
        if other.sigma != self.sigma {
            return Err(Error::InvalidArgument(format!(
                "merging accumulators with sigma {} and {}",
                self.sigma, other.sigma
            )));
        }
        self.count += other.count;
        self.sum_mean += other.sum_mean;
        for (a, b) in self.sum_power.iter_mut().zip(&other.sum_power) {
            *a += b;
        }
        self.sum_bispec.axpy(1.0, &other.sum_bispec);
        Ok(())
    }

    /// Divides the sums by the count. Errors on an empty accumulator.
    pub fn finalize(&self) -> Result<InvariantFeatures> {
        if self.count == 0 {
            return Err(Error::InvalidArgument("cannot finalize an empty accumulator".into()));
        }
        let inv = 1.0 / self.count as f64;
        let mut m3 = self.sum_bispec.clone();
        m3.scale(inv);
        Ok(InvariantFeatures {
            l: self.l,
            sigma: self.sigma,
            n: SampleCount::Finite(self.count),
            m1: self.sum_mean * inv,
            m2: self.sum_power.iter().map(|v| v * inv).collect(),
            m3,
        })
    }
}

/// Population-limit features of a known mixture: the weighted signal
/// features plus the noise bias terms `σ²L·1` on the power spectrum and
/// `m1·σ²L²·A` on the bispectrum.
pub fn analytic_features(
    signals: &SignalSet,
    weights: &MixingWeights,
    sigma: f64,
) -> Result<InvariantFeatures> {
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
    let l = signals.l();
    let dft = Dft::new(l);
    let mut m1 = 0.0;
    let mut m2 = vec![0.0; l];
    let mut m3 = CMat::zeros(l);
    for (x, &w) in signals.iter().zip(weights.values()) {
        let spectrum = dft.forward_real(x.values());
        m1 += w * spectrum[0].re / l as f64;
        for (acc, s) in m2.iter_mut().zip(&spectrum) {
            *acc += w * s.norm_sqr();
        }
        m3.axpy(w, &bispectrum_from_spectrum(&spectrum));
    }
    let power_bias = sigma * sigma * l as f64;
    for v in m2.iter_mut() {
        *v += power_bias;
    }
    let bispec_bias = m1 * sigma * sigma * (l * l) as f64;
    if bispec_bias != 0.0 {
        for i in 0..l {
            for j in 0..l {
                let a = bias_entry(i, j);
                if a != 0.0 {
                    *m3.at_mut(i, j) += Complex64::new(bispec_bias * a, 0.0);
                }
            }
        }
    }
    Ok(InvariantFeatures { l, sigma, n: SampleCount::Infinite, m1, m2, m3 })
}

/// Deterministic multi-accumulator reduction over batches.
///
/// Each batch is folded into its own accumulator and the partial sums are
/// merged in batch order, so the result does not depend on the number of
/// worker threads.
#[cfg(feature = "parallel")]
pub fn accumulate_batches_parallel(
    l: usize,
    sigma: f64,
    batches: &[Vec<Vec<f64>>],
) -> Result<MomentAccumulator> {
    use rayon::prelude::*;
    let partials: Vec<Result<MomentAccumulator>> = batches
        .par_iter()
        .map(|batch| {
            let mut acc = MomentAccumulator::new(l, sigma)?;
            for y in batch {
                acc.accumulate(y)?;
            }
            Ok(acc)
        })
        .collect();
    let mut total = MomentAccumulator::new(l, sigma)?;
    for partial in partials {
        total.merge(&partial?)?;
    }
    Ok(total)
}
