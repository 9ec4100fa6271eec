//! Information-count upper bound on how many signals are recoverable from
//! the averaged invariant features at a given length.
//!
//! The mean contributes one real number. The power spectrum of a real
//! signal satisfies `P[k] = P[L-k]`, leaving `⌊L/2⌋ + 1` distinct values.
//! For the bispectrum, `B[k,ℓ] = x̂[a]·x̂[b]·x̂[c]` with
//! `(a, b, c) = (k, -ℓ, ℓ-k)` summing to zero mod L, so entries sharing the
//! multiset `{a, b, c}` are equal, and negating the multiset conjugates the
//! value. Each self-conjugate orbit therefore carries one real number and
//! each conjugate pair of orbits carries two; the counting is done by
//! explicit enumeration of the orbits.

use std::collections::HashMap;

use crate::{Error, Result};

/// How many distinct real numbers each feature block contributes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureCount {
    pub n1: usize,
    pub n2: usize,
    pub n3: usize,
    pub total: usize,
}

/// One equivalence class of bispectrum entries.
#[derive(Debug, Clone)]
pub struct Orbit {
    /// Canonical sorted triple `{a, b, c}`, `a+b+c ≡ 0 (mod L)`.
    pub triple: [usize; 3],
    /// Entries are real on self-conjugate orbits.
    pub self_conjugate: bool,
    /// Member entries as `(k, ℓ, conjugated)`: the entry equals the orbit
    /// value, or its conjugate when the flag is set.
    pub members: Vec<(usize, usize, bool)>,
}

fn sorted_triple(mut t: [usize; 3]) -> [usize; 3] {
    t.sort_unstable();
    t
}

fn negate_triple(t: [usize; 3], l: usize) -> [usize; 3] {
    sorted_triple([(l - t[0]) % l, (l - t[1]) % l, (l - t[2]) % l])
}

/// Enumerates the bispectrum index orbits of a length-`L` real signal.
pub fn bispectrum_orbits(l: usize) -> Result<Vec<Orbit>> {
    if l < 2 {
        return Err(Error::InvalidArgument(format!("need L >= 2, got {l}")));
    }
    let mut index: HashMap<[usize; 3], usize> = HashMap::new();
    let mut orbits: Vec<Orbit> = Vec::new();
    for k in 0..l {
        for j in 0..l {
            let triple = sorted_triple([k, (l - j) % l, (l + j - k) % l]);
            let negated = negate_triple(triple, l);
            let (canonical, conjugated) = if triple <= negated {
                (triple, false)
            } else {
                (negated, true)
            };
            let orbit = *index.entry(canonical).or_insert_with(|| {
                orbits.push(Orbit {
                    triple: canonical,
                    self_conjugate: canonical == negate_triple(canonical, l),
                    members: Vec::new(),
                });
                orbits.len() - 1
            });
            orbits[orbit].members.push((k, j, conjugated));
        }
    }
    Ok(orbits)
}

/// Distinct real numbers carried by `(M1, M2, M3)` for a generic real
/// signal of length `L`.
pub fn feature_count(l: usize) -> Result<FeatureCount> {
    let orbits = bispectrum_orbits(l)?;
    let n1 = 1;
    let n2 = l / 2 + 1;
    let n3 = orbits.iter().map(|o| if o.self_conjugate { 1 } else { 2 }).sum::<usize>();
    Ok(FeatureCount { n1, n2, n3, total: n1 + n2 + n3 })
}

/// Largest `K` for which the features carry at least as many real numbers
/// as the unknowns: `K·L` for the signals, plus `K−1` when the mixing
/// weights are unknown too.
pub fn max_k(l: usize, weights_unknown: bool) -> Result<usize> {
    let total = feature_count(l)?.total;
    Ok(if weights_unknown {
        // total ≥ K·L + (K−1)  ⇔  K ≤ (total+1)/(L+1)
        (total + 1) / (l + 1)
    } else {
        total / l
    })
}
