//! Deterministic synthetic language model.
//!
//! Generation procedure (all arithmetic on `u64` wraps):
//!
//! * `mix64(z)` is the SplitMix64 output function: add `0x9E3779B97F4A7C15`, then
//!   `z ^= z >> 30; z *= 0xBF58476D1CE4E5B9; z ^= z >> 27; z *= 0x94D049BB133111EB; z ^= z >> 31`.
//! * `unit(z) = (z >> 11) · 2⁻⁵³`, a double in `[0, 1)`.
//! * Context hash: `h = mix64(seed ^ CONTEXT_SALT)`, then for each of the last
//!   (up to) [`WINDOW`] tokens `t`, oldest first, `h = mix64(h ^ (t + 1))`.
//! * Sharpness: `s = SHARPNESS_MIN + (SHARPNESS_MAX − SHARPNESS_MIN) · unit(mix64(h ^ SHARPNESS_SALT))`.
//! * Logits: `ℓ_v = s · (2 · unit(mix64(h ^ (v + 1) · STRIDE)) − 1)`; the base
//!   distribution is their softmax.
//! * Mixing: `p_v = (1 − b) · base_v + b · [v = last token]` with `b` the
//!   repetition bias, then every entry is divided by `Σ p`.
//! * Representation of the newest token `x` with predecessor `w`: let `w' = w + 1`,
//!   or `0` at the start of the context; `r = mix64(mix64(mix64(seed ^ REP_SALT) ^ w') ^ (x + 1))`, components `2 · unit(mix64(r ^ (i + 1) · STRIDE)) − 1`
//!   for `i = 0..dim`, scaled to unit norm.
//!
//! The representation only depends on the (predecessor, token) pair, so a token
//! repeated after itself always reproduces the same vector.

use serde::{Deserialize, Serialize};

use super::{validate_context, Backend, BackendDescriptor, StepOutput, TokenId};
use crate::error::{argument, Result};
use crate::prob::ProbabilityDistribution;
use crate::representation::Representation;

pub const WINDOW: usize = 4;
pub const CONTEXT_SALT: u64 = 0x243F_6A88_85A3_08D3;
pub const SHARPNESS_SALT: u64 = 0x1319_8A2E_0370_7344;
pub const REP_SALT: u64 = 0xA409_3822_299F_31D0;
pub const STRIDE: u64 = 0x9E37_79B9_7F4A_7C15;
pub const SHARPNESS_MIN: f64 = 1.0;
pub const SHARPNESS_MAX: f64 = 8.0;

/// SplitMix64 output function.
pub fn mix64(z: u64) -> u64 {
    let mut z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn unit(z: u64) -> f64 {
    (z >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub vocab_size: usize,
    pub hidden_dim: usize,
    pub seed: u64,
    pub repetition_bias: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            vocab_size: 512,
            hidden_dim: 64,
            seed: 7,
            repetition_bias: 0.0,
        }
    }
}

/// Immutable synthetic model; see the module docs for the exact procedure.
#[derive(Debug, Clone)]
pub struct SyntheticBackend {
    config: SyntheticConfig,
}

impl SyntheticBackend {
    pub fn new(config: SyntheticConfig) -> Result<Self> {
        if config.vocab_size < 2 || config.vocab_size > u32::MAX as usize {
            return Err(argument(format!(
                "vocab_size {} out of range",
                config.vocab_size
            )));
        }
        if config.hidden_dim < 1 {
            return Err(argument("hidden_dim must be >= 1"));
        }
        if !(0.0..=1.0).contains(&config.repetition_bias) {
            return Err(argument(format!(
                "repetition_bias {} outside [0, 1]",
                config.repetition_bias
            )));
        }
        Ok(Self { config })
    }

    pub fn config(&self) -> &SyntheticConfig {
        &self.config
    }

    fn context_hash(&self, context: &[TokenId]) -> u64 {
        let start = context.len().saturating_sub(WINDOW);
        context[start..]
            .iter()
            .fold(mix64(self.config.seed ^ CONTEXT_SALT), |h, t| {
                mix64(h ^ (t.0 as u64 + 1))
            })
    }

    fn distribution(&self, context: &[TokenId]) -> Result<ProbabilityDistribution> {
        let h = self.context_hash(context);
        let sharpness =
            SHARPNESS_MIN + (SHARPNESS_MAX - SHARPNESS_MIN) * unit(mix64(h ^ SHARPNESS_SALT));
        let logits: Vec<f64> = (0..self.config.vocab_size as u64)
            .map(|v| sharpness * (2.0 * unit(mix64(h ^ (v + 1).wrapping_mul(STRIDE))) - 1.0))
            .collect();
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
        let z: f64 = exps.iter().sum();

        let bias = self.config.repetition_bias;
        let last = context[context.len() - 1].index();
        let mut probs: Vec<f64> = exps.iter().map(|e| (1.0 - bias) * (e / z)).collect();
        probs[last] += bias;
        let total: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= total);
        ProbabilityDistribution::new(probs)
    }

    fn representation(&self, context: &[TokenId]) -> Result<Representation> {
        let n = context.len();
        let prev = if n >= 2 {
            context[n - 2].0 as u64 + 1
        } else {
            0
        };
        let last = context[n - 1].0 as u64 + 1;
        let r = mix64(mix64(mix64(self.config.seed ^ REP_SALT) ^ prev) ^ last);
        let raw: Vec<f64> = (0..self.config.hidden_dim as u64)
            .map(|i| 2.0 * unit(mix64(r ^ (i + 1).wrapping_mul(STRIDE))) - 1.0)
            .collect();
        Representation::new(raw)?.normalized()
    }
}

impl Backend for SyntheticBackend {
    fn descriptor(&self) -> BackendDescriptor {
        BackendDescriptor {
            name: format!(
                "synthetic(seed={}, repetition_bias={})",
                self.config.seed, self.config.repetition_bias
            ),
            vocab_size: self.config.vocab_size,
            hidden_dim: self.config.hidden_dim,
        }
    }

    fn step(&self, context: &[TokenId]) -> Result<StepOutput> {
        validate_context(context, self.config.vocab_size)?;
        Ok(StepOutput {
            dist: self.distribution(context)?,
            last_representation: self.representation(context)?,
        })
    }
}
