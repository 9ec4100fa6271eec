//! Estimation of a set of unknown signals from many noisy, cyclically
//! shifted, unlabeled observations.
//!
//! Each observation is a random cyclic shift of one of `K` unknown signals
//! plus white Gaussian noise, and neither the shift nor the class label is
//! available. Instead of estimating those latent variables, this crate
//! computes features that are invariant under cyclic shifts — the mean, the
//! power spectrum and the bispectrum — averages them over all observations
//! in a single pass ([`moments`]), and then recovers the signals and mixing
//! proportions by weighted non-convex least squares ([`solver`]). An
//! expectation-maximization baseline over the latent (shift, class) pairs is
//! provided in [`em`], shift- and permutation-invariant error metrics in
//! [`metrics`], and an information-count bound on how many signals are
//! recoverable for a given length in [`bounds`].

pub mod bounds;
pub mod em;
pub mod estimate;
pub mod features;
pub mod io;
pub mod metrics;
pub mod moments;
pub mod simulate;
pub mod solver;

mod cmat;
mod error;
mod fft;
mod hungarian;
mod signal;
mod trust_region;

pub use cmat::CMat;
pub use error::Error;
pub use fft::Dft;
pub use signal::{MixingWeights, Signal, SignalSet};

/// Crate-wide result type.
pub type Result<T> = std::result::Result<T, Error>;

/// Derives the seed for a numbered sub-task (restart, cell, trial) from a
/// base seed. Splitmix64 of the base offset by the golden-ratio increment,
/// so nearby indices give unrelated streams.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base
        .wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::derive_seed;

    #[test]
    fn derived_seeds_are_distinct() {
        let s: Vec<u64> = (0..64).map(|i| derive_seed(42, i)).collect();
        for i in 0..s.len() {
            for j in 0..i {
                assert_ne!(s[i], s[j]);
            }
        }
    }
}
