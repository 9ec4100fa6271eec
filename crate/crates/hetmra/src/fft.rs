use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Forward and inverse DFT plans for one fixed length.
///
/// The forward transform is unnormalized, `x̂[k] = Σ_n x[n] e^{-2πink/L}`;
/// the inverse carries the `1/L` factor so the pair round-trips.
#[derive(Clone)]
pub struct Dft {
    len: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Dft {
    pub fn new(len: usize) -> Self {
        let mut planner = FftPlanner::new();
        Dft {
            len,
            fwd: planner.plan_fft_forward(len),
            inv: planner.plan_fft_inverse(len),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    /// Spectrum of a real signal.
    pub fn forward_real(&self, x: &[f64]) -> Vec<Complex64> {
        debug_assert_eq!(x.len(), self.len);
        let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fwd.process(&mut buf);
        buf
    }

    /// In-place forward transform of a complex buffer.
    pub fn forward(&self, buf: &mut [Complex64]) {
        debug_assert_eq!(buf.len(), self.len);
        self.fwd.process(buf);
    }

    /// In-place inverse transform, scaled by `1/L`.
    pub fn inverse(&self, buf: &mut [Complex64]) {
        debug_assert_eq!(buf.len(), self.len);
        self.inv.process(buf);
        let scale = 1.0 / self.len as f64;
        for v in buf.iter_mut() {
            *v *= scale;
        }
    }

    /// Real part of the inverse transform of `spectrum`.
    pub fn inverse_real(&self, spectrum: &[Complex64]) -> Vec<f64> {
        let mut buf = spectrum.to_vec();
        self.inverse(&mut buf);
        buf.into_iter().map(|v| v.re).collect()
    }

    /// Circular cross-correlation `c[r] = Σ_n x[n] y[n+r]` of two real
    /// signals, via `c = idft(conj(x̂) ⊙ ŷ)`.
    ///
    /// `c[r]` equals the inner product of `y` with `x` cyclically shifted
    /// by `r`, which is what shift alignment and shift posteriors need.
    pub fn cross_correlation(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let xs = self.forward_real(x);
        let ys = self.forward_real(y);
        self.cross_correlation_spectra(&xs, &ys)
    }

    /// Same as [`Dft::cross_correlation`] but on precomputed spectra.
    pub fn cross_correlation_spectra(&self, xs: &[Complex64], ys: &[Complex64]) -> Vec<f64> {
        let mut buf: Vec<Complex64> = xs.iter().zip(ys).map(|(a, b)| a.conj() * b).collect();
        self.inverse(&mut buf);
        buf.into_iter().map(|v| v.re).collect()
    }
}

impl std::fmt::Debug for Dft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Dft").field("len", &self.len).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn correlation_matches_direct_sum() {
        let l = 7;
        let dft = Dft::new(l);
        let x: Vec<f64> = (0..l).map(|i| (i as f64 * 0.7).sin()).collect();
        let y: Vec<f64> = (0..l).map(|i| (i as f64 * 1.3).cos()).collect();
        let c = dft.cross_correlation(&x, &y);
        for r in 0..l {
            let direct: f64 = (0..l).map(|n| x[n] * y[(n + r) % l]).sum();
            assert!((c[r] - direct).abs() < 1e-12, "lag {r}: {} vs {direct}", c[r]);
        }
    }
}
