use crate::{Error, Result};

/// A real signal of length `L ≥ 2` with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal(Vec<f64>);

impl Signal {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "signal length must be at least 2, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("signal entries must be finite".into()));
        }
        Ok(Signal(values))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// `K ≥ 1` signals of a common length.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalSet(Vec<Signal>);

impl SignalSet {
    pub fn new(signals: Vec<Signal>) -> Result<Self> {
        let Some(first) = signals.first() else {
            return Err(Error::InvalidArgument("signal set must not be empty".into()));
        };
        let l = first.len();
        if signals.iter().any(|s| s.len() != l) {
            return Err(Error::Dimension("signals in a set must share one length".into()));
        }
        Ok(SignalSet(signals))
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        SignalSet::new(rows.into_iter().map(Signal::new).collect::<Result<_>>()?)
    }

    pub fn k(&self) -> usize {
        self.0.len()
    }

    pub fn l(&self) -> usize {
        self.0[0].len()
    }

    pub fn get(&self, index: usize) -> &Signal {
        &self.0[index]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Signal> {
        self.0.iter()
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.0.iter().map(|s| s.values().to_vec()).collect()
    }

    /// Sum of squared norms over the set.
    pub fn total_energy(&self) -> f64 {
        self.0.iter().map(|s| s.norm().powi(2)).sum()
    }
}

/// A point on the probability simplex Δ_K: nonnegative entries summing to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingWeights(Vec<f64>);

impl MixingWeights {
    /// Tolerance on `Σ w[k] = 1` for externally supplied vectors.
    pub const SUM_TOL: f64 = 1e-12;

    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::Simplex("weight vector must not be empty".into()));
        }
        if let Some(v) = w.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::Simplex(format!("entry {v} is negative or non-finite")));
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > Self::SUM_TOL {
            return Err(Error::Simplex(format!("entries sum to {sum}, not 1")));
        }
        Ok(MixingWeights(w))
    }

    pub fn uniform(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Simplex("weight vector must not be empty".into()));
        }
        Ok(MixingWeights(vec![1.0 / k as f64; k]))
    }

    pub fn k(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn min_entry(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn signal_rejects_short_and_non_finite() {
        assert!(Signal::new(vec![1.0]).is_err());
        assert!(Signal::new(vec![1.0, f64::NAN]).is_err());
        assert!(Signal::new(vec![1.0, 2.0]).is_ok());
    }

    #[test]
    fn set_requires_equal_lengths() {
        let a = Signal::new(vec![1.0, 2.0]).unwrap();
        let b = Signal::new(vec![1.0, 2.0, 3.0]).unwrap();
        assert!(SignalSet::new(vec![a.clone(), b]).is_err());
        assert!(SignalSet::new(vec![a.clone(), a]).is_ok());
    }

    #[test]
    fn weights_must_lie_on_simplex() {
        assert!(MixingWeights::new(vec![0.5, 0.5]).is_ok());
        assert!(MixingWeights::new(vec![0.5, 0.6, -0.1]).is_err());
        assert!(MixingWeights::new(vec![0.5, 0.6]).is_err());
        let u = MixingWeights::uniform(4).unwrap();
        assert_eq!(u.values(), &[0.25, 0.25, 0.25, 0.25]);
    }
}
