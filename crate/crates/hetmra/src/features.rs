//! Deterministic per-signal transforms and shift-invariant features.
//!
//! The mean `x̂[0]/L`, the power spectrum `|x̂[k]|²` and the bispectrum
//! `B[k,ℓ] = x̂[k]·conj(x̂[ℓ])·x̂[ℓ-k]` are unchanged when the signal is
//! cyclically shifted, which is what makes them usable as estimation
//! targets when shifts are unobservable.

use num_complex::Complex64;

use crate::{CMat, Dft, Error, Result, Signal};

/// Unnormalized forward DFT, `x̂[k] = Σ_n x[n] e^{-2πink/L}`.
pub fn dft(x: &Signal) -> Vec<Complex64> {
    Dft::new(x.len()).forward_real(x.values())
}

/// Inverse of [`dft`]; carries the `1/L` factor.
pub fn idft(spectrum: &[Complex64]) -> Vec<f64> {
    Dft::new(spectrum.len()).inverse_real(spectrum)
}

/// `output[n] = x[(n - r) mod L]`; any integer shift is accepted.
pub fn cyclic_shift(x: &Signal, r: i64) -> Signal {
    let l = x.len() as i64;
    let r = r.rem_euclid(l) as usize;
    let v = x.values();
    let mut out = Vec::with_capacity(v.len());
    for n in 0..v.len() {
        out.push(v[(n + v.len() - r) % v.len()]);
    }
    Signal::new(out).expect("shift preserves validity")
}

/// Bispectrum from a precomputed spectrum: `B[k,ℓ] = x̂[k]·conj(x̂[ℓ])·x̂[ℓ-k]`,
/// indices mod L.
pub fn bispectrum_from_spectrum(spectrum: &[Complex64]) -> CMat {
    let l = spectrum.len();
    CMat::from_fn(l, |k, j| {
        spectrum[k] * spectrum[j].conj() * spectrum[(l + j - k) % l]
    })
}

/// Per-signal invariant features.
#[derive(Debug, Clone)]
pub struct SignalFeatures {
    pub mean: f64,
    pub power_spectrum: Vec<f64>,
    pub bispectrum: CMat,
}

/// Mean, power spectrum and bispectrum of one signal.
pub fn invariant_features(x: &Signal) -> SignalFeatures {
    invariant_features_with(&Dft::new(x.len()), x.values())
}

/// Same as [`invariant_features`], reusing a DFT plan. The hot path for
/// streaming accumulation.
pub fn invariant_features_with(dft: &Dft, x: &[f64]) -> SignalFeatures {
    let spectrum = dft.forward_real(x);
    SignalFeatures {
        mean: spectrum[0].re / x.len() as f64,
        power_spectrum: spectrum.iter().map(|v| v.norm_sqr()).collect(),
        bispectrum: bispectrum_from_spectrum(&spectrum),
    }
}

/// Entry `[i,j]` of the noise-bias matrix `A`: 3 at the origin, 1 on the
/// rest of the diagonal and of the first row and column, 0 elsewhere.
#[inline]
pub fn bias_entry(i: usize, j: usize) -> f64 {
    if i == 0 && j == 0 {
        3.0
    } else if i == j || i == 0 || j == 0 {
        1.0
    } else {
        0.0
    }
}

/// The dense `L×L` noise-bias matrix.
pub fn bias_matrix(l: usize) -> Result<Vec<Vec<f64>>> {
    if l < 2 {
        return Err(Error::InvalidArgument(format!("bias matrix needs L >= 2, got {l}")));
    }
    Ok((0..l)
        .map(|i| (0..l).map(|j| bias_entry(i, j)).collect())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_signal(l: usize, rng: &mut ChaCha8Rng) -> Signal {
        Signal::new((0..l).map(|_| StandardNormal.sample(rng)).collect()).unwrap()
    }

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol * (1.0 + a.abs().max(b.abs())), "{a} vs {b}");
    }

    #[test]
    fn dft_of_delta_is_flat() {
        let x = Signal::new(vec![1.0, 0.0, 0.0]).unwrap();
        for v in dft(&x) {
            assert_close(v.re, 1.0, 1e-12);
            assert_close(v.im, 0.0, 1e-12);
        }
    }

    #[test]
    fn dft_small_by_hand() {
        let x = Signal::new(vec![1.0, 2.0]).unwrap();
        let s = dft(&x);
        assert_close(s[0].re, 3.0, 1e-12);
        assert_close(s[1].re, -1.0, 1e-12);
        assert_close(s[0].im, 0.0, 1e-12);
        assert_close(s[1].im, 0.0, 1e-12);
    }

    #[test]
    fn dft_of_constant_concentrates_at_zero() {
        let x = Signal::new(vec![1.0; 8]).unwrap();
        let s = dft(&x);
        assert_close(s[0].re, 8.0, 1e-12);
        for v in &s[1..] {
            assert!(v.norm() < 1e-12);
        }
    }

    #[test]
    fn dft_idft_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &l in &[2usize, 3, 17, 64, 509, 512] {
            let x = random_signal(l, &mut rng);
            let back = idft(&dft(&x));
            let num: f64 = x
                .values()
                .iter()
                .zip(&back)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            assert!(num / x.norm() <= 1e-12, "L={l}: relative error {}", num / x.norm());
        }
    }

    #[test]
    fn spectrum_of_real_signal_is_conjugate_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &l in &[5usize, 12, 33] {
            let s = dft(&random_signal(l, &mut rng));
            for k in 1..l {
                assert!((s[l - k] - s[k].conj()).norm() < 1e-9 * (1.0 + s[k].norm()));
            }
        }
    }

    #[test]
    fn cyclic_shift_definition_and_negative_shift() {
        let x = Signal::new(vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(cyclic_shift(&x, 1).values(), &[3.0, 1.0, 2.0]);
        assert_eq!(cyclic_shift(&x, 0).values(), &[1.0, 2.0, 3.0]);
        assert_eq!(cyclic_shift(&x, -1).values(), &[2.0, 3.0, 1.0]);
        assert_eq!(cyclic_shift(&x, 4).values(), cyclic_shift(&x, 1).values());
    }

    #[test]
    fn features_of_small_signal_by_hand() {
        let x = Signal::new(vec![1.0, 2.0]).unwrap();
        let f = invariant_features(&x);
        assert_close(f.mean, 1.5, 1e-12);
        assert_close(f.power_spectrum[0], 9.0, 1e-12);
        assert_close(f.power_spectrum[1], 1.0, 1e-12);
        let expect = [[27.0, 3.0], [3.0, 3.0]];
        for k in 0..2 {
            for j in 0..2 {
                assert_close(f.bispectrum.at(k, j).re, expect[k][j], 1e-12);
                assert_close(f.bispectrum.at(k, j).im, 0.0, 1e-12);
            }
        }
    }

    #[test]
    fn features_of_zero_signal_vanish() {
        let x = Signal::new(vec![0.0; 6]).unwrap();
        let f = invariant_features(&x);
        assert_eq!(f.mean, 0.0);
        assert!(f.power_spectrum.iter().all(|&p| p == 0.0));
        assert_eq!(f.bispectrum.frobenius_norm(), 0.0);
    }

    #[test]
    fn features_are_shift_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &l in &[2usize, 3, 8, 13, 32] {
            let x = random_signal(l, &mut rng);
            let fx = invariant_features(&x);
            for r in 0..l as i64 {
                let fy = invariant_features(&cyclic_shift(&x, r));
                assert_close(fx.mean, fy.mean, 1e-10);
                for k in 0..l {
                    assert_close(fx.power_spectrum[k], fy.power_spectrum[k], 1e-10);
                }
                let scale = fx.bispectrum.frobenius_norm().max(1.0);
                assert!(fx.bispectrum.frobenius_dist(&fy.bispectrum) <= 1e-10 * scale);
            }
        }
    }

    #[test]
    fn bispectrum_matches_brute_force_triple_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for &l in &[4usize, 9] {
            let x = random_signal(l, &mut rng);
            let s = dft(&x);
            let b = bispectrum_from_spectrum(&s);
            for k in 0..l {
                for j in 0..l {
                    let direct = s[k] * s[j].conj() * s[(l + j - k) % l];
                    assert_eq!(b.at(k, j), direct);
                }
            }
        }
    }

    #[test]
    fn bias_matrix_small_cases() {
        assert!(bias_matrix(1).is_err());
        assert_eq!(bias_matrix(2).unwrap(), vec![vec![3.0, 1.0], vec![1.0, 1.0]]);
        assert_eq!(
            bias_matrix(3).unwrap(),
            vec![vec![3.0, 1.0, 1.0], vec![1.0, 1.0, 0.0], vec![1.0, 0.0, 1.0]]
        );
        let a = bias_matrix(10).unwrap();
        for i in 0..10 {
            assert_eq!(a[0][i], if i == 0 { 3.0 } else { 1.0 });
            assert_eq!(a[i][0], if i == 0 { 3.0 } else { 1.0 });
        }
    }
}
