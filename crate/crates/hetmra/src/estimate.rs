//! Recovered mixtures and their diagnostics, with a common JSON form shared
//! by the feature-inversion solver and the EM baseline.

use serde::{Deserialize, Serialize};

use crate::{Error, MixingWeights, Result, SignalSet};

/// A recovered signal set plus run diagnostics.
#[derive(Debug, Clone)]
pub struct Estimate {
    pub signals: SignalSet,
    pub weights: MixingWeights,
    /// Final scaled cost; `None` for estimators without a cost (EM).
    pub cost: Option<f64>,
    /// Final gradient norm; `None` for EM.
    pub grad_norm: Option<f64>,
    pub iterations: u64,
    pub restart_index: u32,
    pub converged: bool,
    /// Classes whose EM update denominator (almost) vanished at some
    /// iteration. Always empty for the solver.
    pub starved: Vec<u32>,
}

#[derive(Serialize, Deserialize)]
struct EstimateJson {
    #[serde(rename = "L")]
    l: usize,
    #[serde(rename = "K")]
    k: usize,
    signals: Vec<Vec<f64>>,
    weights: Vec<f64>,
    cost: Option<f64>,
    diagnostics: DiagnosticsJson,
}

#[derive(Serialize, Deserialize)]
struct DiagnosticsJson {
    iterations: u64,
    grad_norm: Option<f64>,
    restart_index: u32,
    converged: bool,
    starved: Vec<u32>,
}

impl Estimate {
    pub fn to_json(&self) -> Result<String> {
        let raw = EstimateJson {
            l: self.signals.l(),
            k: self.signals.k(),
            signals: self.signals.rows(),
            weights: self.weights.values().to_vec(),
            cost: self.cost,
            diagnostics: DiagnosticsJson {
                iterations: self.iterations,
                grad_norm: self.grad_norm,
                restart_index: self.restart_index,
                converged: self.converged,
                starved: self.starved.clone(),
            },
        };
        Ok(serde_json::to_string_pretty(&raw)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: EstimateJson = serde_json::from_str(text)?;
        let signals = SignalSet::from_rows(raw.signals)?;
        if signals.k() != raw.k || signals.l() != raw.l {
            return Err(Error::Format("estimate header disagrees with signal block".into()));
        }
        let weights = MixingWeights::new(raw.weights)?;
        if weights.k() != raw.k {
            return Err(Error::Format("estimate weights disagree with K".into()));
        }
        Ok(Estimate {
            signals,
            weights,
            cost: raw.cost,
            grad_norm: raw.diagnostics.grad_norm,
            iterations: raw.diagnostics.iterations,
            restart_index: raw.diagnostics.restart_index,
            converged: raw.diagnostics.converged,
            starved: raw.diagnostics.starved,
        })
    }
}
