//! Seeded randomness for the stochastic decoders.
//!
//! The generator is ChaCha8 seeded through `SeedableRng::seed_from_u64`. Each
//! draw takes one `u64` and keeps its top 53 bits as a double in `[0, 1)`.
//! Sampling walks the renormalized support in ascending token-id order and
//! returns the first token whose cumulative mass exceeds `u · total`.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::backend::TokenId;
use crate::prob::ProbabilityDistribution;

#[derive(Debug, Clone)]
pub struct SampleRng {
    inner: ChaCha8Rng,
}

impl SampleRng {
    pub fn from_seed(seed: u64) -> Self {
        Self {
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Uniform double in `[0, 1)`.
    pub fn next_unit(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// Inverse-CDF draw restricted to `support`. Panics if `support` is empty.
pub fn sample_support(
    dist: &ProbabilityDistribution,
    support: &[usize],
    rng: &mut SampleRng,
) -> TokenId {
    let mut ids = support.to_vec();
    ids.sort_unstable();
    let total: f64 = ids.iter().map(|&i| dist.get(i)).sum();
    let target = rng.next_unit() * total;
    let mut cumulative = 0.0;
    for &i in &ids {
        cumulative += dist.get(i);
        if cumulative > target {
            return TokenId::from(i);
        }
    }
    TokenId::from(*ids.last().expect("non-empty support"))
}
