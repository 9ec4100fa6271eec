//! Weighted non-convex least-squares inversion of mixed invariant features.
//!
//! Given averaged features `(m1, m2, m3)` estimated under a known noise
//! level, the solver searches for `K` signals and (optionally) mixing
//! weights whose mixture of per-signal features reproduces them:
//!
//! ```text
//! min  |Σ w̃_k·L·μ_k − L·m1|²
//!    + 1/(σ²L + 2P)  · ‖Σ w̃_k·P_k + σ²L·1 − m2‖²
//!    + 1/(σ⁴L² + 3P²) · ‖Σ w̃_k·B_k + m1·σ²L²·A − m3‖²_F
//! ```
//!
//! scaled overall by `(σ⁴L² + 3P²)/2`. The term weights are reciprocal
//! variance approximations of the per-feature estimation errors, with `P`
//! a typical power-spectrum level. A run whose scaled cost drops below
//! `1e-16` is declared a global optimum.
//!
//! The simplex constraint on the weights is handled by a softmax
//! reparameterization (one logit pinned to zero), so a standard smooth
//! unconstrained optimizer applies; cost and gradient take `O(KL²)` flops
//! regardless of how many observations produced the features.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::estimate::Estimate;
use crate::features::bias_entry;
use crate::moments::InvariantFeatures;
use crate::trust_region::{self, StopReason, TrustRegionOptions};
use crate::{derive_seed, CMat, Dft, Error, MixingWeights, Result, SignalSet};

/// Floor applied to the data-driven estimate of the typical power-spectrum
/// level.
pub const P_FLOOR: f64 = 1e-6;

/// Variance-based term weights of the cost, derived from `(σ, L, P)`.
#[derive(Debug, Clone, Copy)]
pub struct CostWeights {
    pub sigma: f64,
    pub l: usize,
    /// Typical power-spectrum level.
    pub p: f64,
    /// `1/(σ²L + 2P)`.
    pub w2: f64,
    /// `1/(σ⁴L² + 3P²)`.
    pub w3: f64,
    /// `(σ⁴L² + 3P²)/2`; multiplies the whole cost.
    pub global_scale: f64,
}

impl CostWeights {
    pub fn new(sigma: f64, l: usize, p: f64) -> Result<Self> {
        if l < 2 {
            return Err(Error::InvalidArgument(format!("need L >= 2, got {l}")));
        }
        if !sigma.is_finite() || sigma < 0.0 || !p.is_finite() || p <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "need sigma >= 0 and P > 0, got sigma={sigma}, P={p}"
            )));
        }
        let s2l = sigma * sigma * l as f64;
        let s4l2 = s2l * s2l;
        Ok(CostWeights {
            sigma,
            l,
            p,
            w2: 1.0 / (s2l + 2.0 * p),
            w3: 1.0 / (s4l2 + 3.0 * p * p),
            global_scale: (s4l2 + 3.0 * p * p) / 2.0,
        })
    }
}

/// Data-driven choice of the typical power-spectrum level:
/// `max(mean_k(m2[k] − σ²L), P_FLOOR)`.
pub fn default_p(f: &InvariantFeatures) -> f64 {
    let bias = f.sigma * f.sigma * f.l as f64;
    let mean = f.m2.iter().map(|m| m - bias).sum::<f64>() / f.l as f64;
    mean.max(P_FLOOR)
}

/// A candidate mixture: signals and weights, with the weights either free
/// or held fixed during optimization.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub signals: SignalSet,
    pub weights: MixingWeights,
    pub weights_fixed: bool,
}

/// Gradient of the cost at a candidate.
#[derive(Debug, Clone)]
pub struct CostGradient {
    /// One gradient vector per candidate signal.
    pub signals: Vec<Vec<f64>>,
    /// Gradient with respect to the weights, projected onto the simplex
    /// tangent space (components sum to zero). Absent when weights are
    /// fixed.
    pub weights: Option<Vec<f64>>,
}

/// Scaled least-squares cost of a candidate against the features.
pub fn cost(c: &Candidate, f: &InvariantFeatures, cw: &CostWeights) -> Result<f64> {
    let objective = Objective::new(f, cw, c.signals.k(), None)?;
    let rows = c.signals.rows();
    let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
    Ok(objective.evaluate(&refs, c.weights.values(), None))
}

/// Analytic gradient of [`cost`]; matches central finite differences to
/// `1e-6` relative at generic points.
pub fn gradient(c: &Candidate, f: &InvariantFeatures, cw: &CostWeights) -> Result<CostGradient> {
    let objective = Objective::new(f, cw, c.signals.k(), None)?;
    let mut grad = GradBuffers::new(c.signals.k(), c.signals.l());
    let rows = c.signals.rows();
    let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
    objective.evaluate(&refs, c.weights.values(), Some(&mut grad));
    let weights = if c.weights_fixed {
        None
    } else {
        let mean = grad.weights.iter().sum::<f64>() / grad.weights.len() as f64;
        Some(grad.weights.iter().map(|g| g - mean).collect())
    };
    Ok(CostGradient { signals: grad.signals, weights })
}

/// How the solver treats the mixing weights.
#[derive(Debug, Clone)]
pub enum WeightsSpec {
    /// Optimize the weights, initialized uniform.
    Free,
    /// Hold the given weights fixed.
    Fixed(MixingWeights),
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Noise level; must agree with the features when set.
    pub sigma: Option<f64>,
    pub weights: WeightsSpec,
    /// Typical power-spectrum level; defaults to [`default_p`].
    pub p: Option<f64>,
    /// Gradient-norm stopping tolerance on the scaled cost.
    pub gtol: f64,
    pub max_iter: u64,
    /// Scaled-cost threshold under which a run is declared global.
    pub global_tol: f64,
    /// Standard deviation of the random signal initialization.
    pub init_scale: f64,
    pub seed: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            sigma: None,
            weights: WeightsSpec::Free,
            p: None,
            gtol: 1e-10,
            max_iter: 2000,
            global_tol: 1e-16,
            init_scale: 1.0,
            seed: 0,
        }
    }
}

/// One local-optimization run from a random initialization.
///
/// Signals start i.i.d. `N(0, init_scale²)`; free weights start uniform.
/// Deterministic given `opts.seed`.
pub fn solve(f: &InvariantFeatures, k: usize, opts: &SolveOptions) -> Result<Estimate> {
    if k < 1 {
        return Err(Error::InvalidArgument("need K >= 1".into()));
    }
    if let Some(sigma) = opts.sigma {
        if sigma != f.sigma {
            return Err(Error::InvalidArgument(format!(
                "options say sigma={sigma} but features carry sigma={}",
                f.sigma
            )));
        }
    }
    let p = match opts.p {
        Some(p) => p,
        None => default_p(f),
    };
    let cw = CostWeights::new(f.sigma, f.l, p)?;

    let fixed = match &opts.weights {
        WeightsSpec::Free => None,
        WeightsSpec::Fixed(w) => {
            if w.k() != k {
                return Err(Error::Dimension(format!("{} fixed weights for K={k}", w.k())));
            }
            Some(w.values().to_vec())
        }
    };
    let objective = Objective::new(f, &cw, k, fixed)?;
    let l = f.l;

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut params = vec![0.0; objective.n_params()];
    for v in params.iter_mut().take(k * l) {
        let e: f64 = StandardNormal.sample(&mut rng);
        *v = opts.init_scale * e;
    }
    // Free logits stay zero: uniform initial weights.

    let tr_opts = TrustRegionOptions {
        max_iter: opts.max_iter,
        gtol: opts.gtol,
        ..Default::default()
    };
    let mut grad = GradBuffers::new(k, l);
    let result = trust_region::minimize(
        |x, g| objective.eval_packed(x, g, &mut grad),
        params,
        &tr_opts,
    );
    if result.stop == StopReason::NonFinite {
        return Err(Error::NonFinite { iteration: result.iterations });
    }

    let (signals, weights) = objective.unpack(&result.x)?;
    Ok(Estimate {
        signals,
        weights,
        cost: Some(result.cost),
        grad_norm: Some(result.grad_norm),
        iterations: result.iterations,
        restart_index: 0,
        converged: result.stop == StopReason::GradientTolerance,
        starved: vec![],
    })
}

/// Result of [`multi_start`].
#[derive(Debug, Clone)]
pub struct MultiStartOutcome {
    /// Lowest-cost estimate; ties keep the lowest restart index.
    pub best: Estimate,
    /// Final scaled cost of every run (`+inf` for failed runs).
    pub all_costs: Vec<f64>,
    /// Whether each run was declared a global optimum.
    pub global_flags: Vec<bool>,
    /// Indices of runs that aborted (non-finite cost).
    pub failures: Vec<u32>,
}

/// `restarts` independent [`solve`] runs with seeds derived from
/// `opts.seed`; per-run failures are reported as flags, not errors.
pub fn multi_start(
    f: &InvariantFeatures,
    k: usize,
    restarts: u32,
    opts: &SolveOptions,
) -> Result<MultiStartOutcome> {
    if restarts < 1 {
        return Err(Error::InvalidArgument("need at least one restart".into()));
    }
    let run = |i: u32| -> Result<Estimate> {
        let run_opts = SolveOptions { seed: derive_seed(opts.seed, i as u64), ..opts.clone() };
        let mut est = solve(f, k, &run_opts)?;
        est.restart_index = i;
        Ok(est)
    };

    #[cfg(feature = "parallel")]
    let runs: Vec<Result<Estimate>> = {
        use rayon::prelude::*;
        (0..restarts).into_par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let runs: Vec<Result<Estimate>> = (0..restarts).map(run).collect();

    let mut all_costs = Vec::with_capacity(restarts as usize);
    let mut global_flags = Vec::with_capacity(restarts as usize);
    let mut failures = Vec::new();
    let mut best: Option<Estimate> = None;
    for (i, run) in runs.into_iter().enumerate() {
        match run {
            Ok(est) => {
                let c = est.cost.expect("solver estimates carry a cost");
                all_costs.push(c);
                global_flags.push(c < opts.global_tol);
                if best.as_ref().map_or(true, |b| c < b.cost.unwrap()) {
                    best = Some(est);
                }
            }
            Err(_) => {
                all_costs.push(f64::INFINITY);
                global_flags.push(false);
                failures.push(i as u32);
            }
        }
    }
    let best = best.ok_or_else(|| Error::InvalidArgument("every restart failed".into()))?;
    Ok(MultiStartOutcome { best, all_costs, global_flags, failures })
}

// ── Objective internals ─────────────────────────────────────────────

pub(crate) struct GradBuffers {
    signals: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl GradBuffers {
    fn new(k: usize, l: usize) -> Self {
        GradBuffers { signals: vec![vec![0.0; l]; k], weights: vec![0.0; k] }
    }
}

/// The packed-parameter objective: residual targets, term weights and the
/// DFT plan for one `(features, K)` problem.
struct Objective {
    k: usize,
    l: usize,
    cw: CostWeights,
    /// `L·m1`.
    target1: f64,
    /// `m2 − σ²L·1`.
    target2: Vec<f64>,
    /// `m3 − m1·σ²L²·A`.
    target3: CMat,
    dft: Dft,
    /// `Some(w)` when the weights are held fixed.
    fixed_weights: Option<Vec<f64>>,
}

impl Objective {
    fn new(
        f: &InvariantFeatures,
        cw: &CostWeights,
        k: usize,
        fixed_weights: Option<Vec<f64>>,
    ) -> Result<Self> {
        if f.l != cw.l {
            return Err(Error::Dimension(format!(
                "features have L={} but cost weights have L={}",
                f.l, cw.l
            )));
        }
        if f.sigma != cw.sigma {
            return Err(Error::InvalidArgument(format!(
                "features carry sigma={} but cost weights carry sigma={}",
                f.sigma, cw.sigma
            )));
        }
        if f.m2.len() != f.l || f.m3.n() != f.l {
            return Err(Error::Dimension("features have inconsistent dimensions".into()));
        }
        let l = f.l;
        let power_bias = f.sigma * f.sigma * l as f64;
        let target2 = f.m2.iter().map(|m| m - power_bias).collect();
        let bispec_bias = f.m1 * f.sigma * f.sigma * (l * l) as f64;
        let target3 = CMat::from_fn(l, |i, j| {
            f.m3.at(i, j) - Complex64::new(bispec_bias * bias_entry(i, j), 0.0)
        });
        Ok(Objective {
            k,
            l,
            cw: *cw,
            target1: l as f64 * f.m1,
            target2,
            target3,
            dft: Dft::new(l),
            fixed_weights,
        })
    }

    fn n_params(&self) -> usize {
        self.k * self.l + if self.fixed_weights.is_none() { self.k - 1 } else { 0 }
    }

    fn weights_from_logits(&self, logits: &[f64]) -> Vec<f64> {
        // Last logit pinned to zero for identifiability.
        let max = logits.iter().copied().fold(0.0f64, f64::max);
        let mut w: Vec<f64> = logits.iter().map(|t| (t - max).exp()).collect();
        w.push((-max).exp());
        let sum: f64 = w.iter().sum();
        for v in w.iter_mut() {
            *v /= sum;
        }
        w
    }

    fn unpack(&self, params: &[f64]) -> Result<(SignalSet, MixingWeights)> {
        let rows: Vec<Vec<f64>> =
            (0..self.k).map(|c| params[c * self.l..(c + 1) * self.l].to_vec()).collect();
        let signals = SignalSet::from_rows(rows)?;
        let weights = match &self.fixed_weights {
            Some(w) => MixingWeights::new(w.clone())?,
            None => MixingWeights::new(self.weights_from_logits(&params[self.k * self.l..]))?,
        };
        Ok((signals, weights))
    }

    /// Cost and, when `packed_grad` is given, the full packed gradient
    /// (signal block plus free-logit block).
    fn eval_packed(&self, params: &[f64], packed_grad: &mut [f64], grad: &mut GradBuffers) -> f64 {
        let signal_rows: Vec<&[f64]> =
            (0..self.k).map(|c| &params[c * self.l..(c + 1) * self.l]).collect();
        let weights = match &self.fixed_weights {
            Some(w) => w.clone(),
            None => self.weights_from_logits(&params[self.k * self.l..]),
        };
        let cost = self.evaluate(&signal_rows, &weights, Some(grad));

        for c in 0..self.k {
            packed_grad[c * self.l..(c + 1) * self.l].copy_from_slice(&grad.signals[c]);
        }
        if self.fixed_weights.is_none() {
            // Chain rule through the softmax with the last logit pinned:
            // dF/dθ_i = w_i (dF/dw_i − Σ_c w_c dF/dw_c).
            let inner: f64 = weights.iter().zip(&grad.weights).map(|(w, g)| w * g).sum();
            for i in 0..self.k - 1 {
                packed_grad[self.k * self.l + i] = weights[i] * (grad.weights[i] - inner);
            }
        }
        cost
    }

    /// Core evaluation: scaled cost, plus raw signal/weight gradients when
    /// `grad` is given (no simplex projection, no logit chain).
    fn evaluate(&self, signals: &[&[f64]], weights: &[f64], grad: Option<&mut GradBuffers>) -> f64 {
        let l = self.l;
        let k = self.k;
        debug_assert_eq!(signals.len(), k);
        debug_assert_eq!(weights.len(), k);

        // Per-class spectra and the three mixed residuals.
        let spectra: Vec<Vec<Complex64>> =
            signals.iter().map(|x| self.dft.forward_real(x)).collect();
        let sums: Vec<f64> = signals.iter().map(|x| x.iter().sum()).collect();

        let e1: f64 = weights.iter().zip(&sums).map(|(w, s)| w * s).sum::<f64>() - self.target1;

        let mut res2 = vec![0.0; l];
        for (w, spectrum) in weights.iter().zip(&spectra) {
            for (r, s) in res2.iter_mut().zip(spectrum) {
                *r += w * s.norm_sqr();
            }
        }
        for (r, t) in res2.iter_mut().zip(&self.target2) {
            *r -= t;
        }

        let mut res3 = self.target3.clone();
        res3.scale(-1.0);
        let mut kernel = vec![Complex64::new(0.0, 0.0); l * l];
        for (w, spectrum) in weights.iter().zip(&spectra) {
            bispectrum_kernel(spectrum, &mut kernel);
            let data = res3.as_mut_slice();
            for a in 0..l {
                let sa = spectrum[a] * w;
                let row = &mut data[a * l..(a + 1) * l];
                let krow = &kernel[a * l..(a + 1) * l];
                for (cell, t) in row.iter_mut().zip(krow) {
                    *cell += sa * t;
                }
            }
        }

        let t1 = e1 * e1;
        let t2: f64 = res2.iter().map(|r| r * r).sum();
        let t3: f64 = res3.as_slice().iter().map(|r| r.norm_sqr()).sum();
        let scale = self.cw.global_scale;
        let cost = scale * (t1 + self.cw.w2 * t2 + self.cw.w3 * t3);

        let Some(grad) = grad else {
            return cost;
        };

        let r3 = res3.as_slice();
        let mut d = vec![Complex64::new(0.0, 0.0); l];
        for c in 0..k {
            let w = weights[c];
            let spectrum = &spectra[c];
            bispectrum_kernel(spectrum, &mut kernel);

            // Frequency-domain derivative of the second and third terms:
            // for each m, the three slots of X[a]·conj(X[b])·X[b−a] in
            // which X[m] (or its conjugate) appears.
            let mut b_dot = 0.0;
            for m in 0..l {
                let mut s = Complex64::new(0.0, 0.0);
                // a = m: conj(res3[m,b])·conj(X[b])·X[b−m] = conj(res3)·kernel.
                // The same row products feed the weight gradient.
                let krow = &kernel[m * l..(m + 1) * l];
                let rrow = &r3[m * l..(m + 1) * l];
                let mut row_dot = Complex64::new(0.0, 0.0);
                for (r, t) in rrow.iter().zip(krow) {
                    row_dot += r.conj() * t;
                }
                s += row_dot;
                b_dot += (spectrum[m] * row_dot).re;
                // b − a = m: conj(res3[a, a+m])·X[a]·conj(X[a+m]), and
                // kernel[m, a+m] = conj(X[a+m])·X[a].
                for a in 0..l - m {
                    s += r3[a * l + (a + m)].conj() * kernel[m * l + a + m];
                }
                for a in l - m..l {
                    s += r3[a * l + (a + m - l)].conj() * kernel[m * l + a + m - l];
                }
                // b = m: res3[a,m]·conj(X[a]·X[m−a]).
                let mut s3 = Complex64::new(0.0, 0.0);
                for a in 0..=m {
                    s3 += r3[a * l + m] * (spectrum[a] * spectrum[m - a]).conj();
                }
                for a in m + 1..l {
                    s3 += r3[a * l + m] * (spectrum[a] * spectrum[m + l - a]).conj();
                }
                s += s3;
                d[m] = 2.0 * self.cw.w2 * w * res2[m] * spectrum[m].conj() + self.cw.w3 * w * s;
            }
            self.dft.forward(&mut d);
            let g = &mut grad.signals[c];
            let t1_part = 2.0 * e1 * w;
            for (gi, di) in g.iter_mut().zip(&d) {
                *gi = scale * (t1_part + 2.0 * di.re);
            }

            let p_dot: f64 = res2
                .iter()
                .zip(spectrum)
                .map(|(r, s)| r * s.norm_sqr())
                .sum();
            grad.weights[c] =
                scale * (2.0 * e1 * sums[c] + 2.0 * self.cw.w2 * p_dot + 2.0 * self.cw.w3 * b_dot);
        }
        cost
    }
}

/// `kernel[a*L + b] = conj(X[b])·X[(b − a) mod L]`; the bispectrum row `a`
/// is `X[a]` times this row.
fn bispectrum_kernel(spectrum: &[Complex64], kernel: &mut [Complex64]) {
    let l = spectrum.len();
    for a in 0..l {
        let row = &mut kernel[a * l..(a + 1) * l];
        for b in a..l {
            row[b] = spectrum[b].conj() * spectrum[b - a];
        }
        for b in 0..a {
            row[b] = spectrum[b].conj() * spectrum[b + l - a];
        }
    }
}
