//! Pignistic probabilities and Deng's uncertainty measures.

use serde::{Deserialize, Serialize};

use super::{Bba, HypothesisSet};

/// Deng uncertainty of one assignment, in bits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyTriple {
    pub nonspecificity: f64,
    pub discord: f64,
    pub entropy: f64,
}

/// `log2(2^k − 1)` for `k = 0..=16`.
fn nonspecificity_weight(cardinality: u32) -> f64 {
    (((1u32 << cardinality) - 1) as f64).log2()
}

/// Deng measures over raw `(mask, mass)` pairs. Zero masses contribute
/// nothing to the discord.
pub(crate) fn deng_of(focal: &[(u16, f64)]) -> UncertaintyTriple {
    let mut nonspecificity = 0.0;
    let mut discord = 0.0;
    for &(mask, mass) in focal {
        if mass <= 0.0 || mask == 0 {
            continue;
        }
        nonspecificity += mass * nonspecificity_weight(mask.count_ones());
        // Rounding can leave a lone mass just above 1; its discord is 0.
        discord -= mass * mass.min(1.0).log2();
    }
    UncertaintyTriple {
        nonspecificity,
        discord,
        entropy: nonspecificity + discord,
    }
}

pub fn deng_measures(m: &Bba) -> UncertaintyTriple {
    deng_of(m.raw())
}

/// Upper bound of the nonspecificity on a frame of `size` singletons,
/// `log2(2^size − 1)`, reached by the vacuous assignment.
pub fn max_nonspecificity(size: usize) -> f64 {
    nonspecificity_weight(size as u32)
}

/// Upper bound of the Deng entropy, `log2 Σ_A (2^|A| − 1) = log2(3^n − 2^n)`,
/// reached by `m(A) ∝ 2^|A| − 1`. It exceeds the vacuous entropy for n ≥ 2.
pub fn max_deng_entropy(size: usize) -> f64 {
    (3f64.powi(size as i32) - 2f64.powi(size as i32)).log2()
}

/// `BetP(A) = Σ_B |A ∩ B| / |B| · m(B)` for an arbitrary subset `A`.
fn pignistic_of_set(m: &Bba, set: HypothesisSet) -> f64 {
    m.raw()
        .iter()
        .map(|&(mask, mass)| {
            let shared = (mask & set.mask()).count_ones() as f64;
            shared / mask.count_ones() as f64 * mass
        })
        .sum()
}

/// Pignistic probability of every singleton, indexed like the frame names.
pub fn pignistic(m: &Bba) -> Vec<f64> {
    m.fod()
        .singletons()
        .map(|s| pignistic_of_set(m, s))
        .collect()
}
