//! Probability distributions, Shannon entropy, and the entropy-standardization
//! machinery that drives the adaptive candidate-pool size and penalty weight.
//!
//! Everything here is a pure function of its inputs. Logarithms are natural, so
//! all entropies are in nats.

use serde::{Deserialize, Serialize};

use crate::error::{argument, validation, Result};

/// Tolerance on the total mass of a distribution.
pub const MASS_TOLERANCE: f64 = 1e-9;

/// Margin kept between the standardized ratio and the poles of `atanh`.
pub const ATANH_EPSILON: f64 = 1e-6;

/// Smallest and largest candidate-pool size the adaptive rule can produce.
pub const K_MIN: usize = 5;
pub const K_MAX: usize = 15;

/// Bounds that keep `α` strictly inside `(0, 1)` once the sigmoid saturates in
/// floating point: the smallest positive normal double and the largest double
/// below 1.
pub const ALPHA_MIN: f64 = f64::MIN_POSITIVE;
pub const ALPHA_MAX: f64 = 1.0 - f64::EPSILON / 2.0;

/// Cap on `|δ|` before exponentiation in [`double_exp_delta`].
pub const DOUBLE_EXP_CAP: f64 = 30.0;

/// A normalized distribution over a token vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ProbabilityDistribution {
    probs: Vec<f64>,
}

impl ProbabilityDistribution {
    /// Validates `probs`: at least two entries, all finite and non-negative,
    /// summing to one within [`MASS_TOLERANCE`].
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.len() < 2 {
            return Err(validation(format!(
                "distribution needs at least 2 entries, got {}",
                probs.len()
            )));
        }
        if let Some((i, p)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !p.is_finite() || **p < 0.0)
        {
            return Err(validation(format!("invalid mass {p} at token {i}")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(validation(format!("masses sum to {total}, expected 1")));
        }
        Ok(Self { probs })
    }

    /// Normalizes non-negative weights into a distribution.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total.is_finite() && total > 0.0) {
            return Err(validation(format!("weights sum to {total}")));
        }
        Self::new(weights.into_iter().map(|w| w / total).collect())
    }

    /// Uniform distribution over `n` tokens.
    pub fn uniform(n: usize) -> Result<Self> {
        Self::new(vec![1.0 / n as f64; n])
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn vocab_size(&self) -> usize {
        self.probs.len()
    }

    pub fn get(&self, token: usize) -> f64 {
        self.probs[token]
    }

    /// Entropy of the uniform distribution over the vocabulary, `ln |V|`.
    pub fn max_entropy(&self) -> f64 {
        (self.vocab_size() as f64).ln()
    }
}

impl TryFrom<Vec<f64>> for ProbabilityDistribution {
    type Error = crate::Error;

    fn try_from(probs: Vec<f64>) -> Result<Self> {
        Self::new(probs)
    }
}

impl From<ProbabilityDistribution> for Vec<f64> {
    fn from(dist: ProbabilityDistribution) -> Self {
        dist.probs
    }
}

fn entropy_of(masses: impl Iterator<Item = f64>) -> f64 {
    -masses.filter(|&p| p > 0.0).map(|p| p * p.ln()).sum::<f64>()
}

/// Shannon entropy `−Σ p ln p` with `0 ln 0 = 0`, clamped to `[0, ln |V|]`.
pub fn shannon_entropy(dist: &ProbabilityDistribution) -> f64 {
    entropy_of(dist.probs.iter().copied()).clamp(0.0, dist.max_entropy())
}

/// Token ids of the `k` highest-mass tokens, in descending mass order with ties
/// broken by lowest token id.
pub fn top_k_indices(dist: &ProbabilityDistribution, k: usize) -> Result<Vec<usize>> {
    let n = dist.vocab_size();
    if k == 0 || k > n {
        return Err(argument(format!("k = {k} outside 1..={n}")));
    }
    let order = |a: &usize, b: &usize| {
        dist.probs[*b]
            .total_cmp(&dist.probs[*a])
            .then_with(|| a.cmp(b))
    };
    let mut ids: Vec<usize> = (0..n).collect();
    if k < n {
        ids.select_nth_unstable_by(k - 1, order);
        ids.truncate(k);
    }
    ids.sort_unstable_by(order);
    Ok(ids)
}

/// Entropy of the renormalized distribution over a given token subset.
pub fn subset_entropy(dist: &ProbabilityDistribution, ids: &[usize]) -> f64 {
    let total: f64 = ids.iter().map(|&i| dist.probs[i]).sum();
    if total <= 0.0 {
        return 0.0;
    }
    let h = entropy_of(ids.iter().map(|&i| dist.probs[i] / total));
    h.clamp(0.0, (ids.len() as f64).ln())
}

/// Entropy of the top-`k` tokens after renormalizing their masses.
///
/// With `k = |V|` this is exactly [`shannon_entropy`].
pub fn topk_entropy(dist: &ProbabilityDistribution, k: usize) -> Result<f64> {
    let ids = top_k_indices(dist, k)?;
    if k == dist.vocab_size() {
        return Ok(shannon_entropy(dist));
    }
    Ok(subset_entropy(dist, &ids))
}

/// Median with midpoint averaging for even lengths. `None` when empty.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    Some(if sorted.len().is_multiple_of(2) {
        0.5 * (sorted[mid - 1] + sorted[mid])
    } else {
        sorted[mid]
    })
}

/// Centers `current_entropy` on the median of `history`, scales by `max_entropy`,
/// and maps through `q · atanh`.
///
/// The ratio is clamped to `[−1+ε, 1−ε]` with `ε =` [`ATANH_EPSILON`]. An empty history
/// centers on the current value itself, giving `δ = 0`.
pub fn standardized_delta(
    current_entropy: f64,
    history: &[f64],
    max_entropy: f64,
    q: f64,
) -> Result<f64> {
    if !current_entropy.is_finite() || !max_entropy.is_finite() || !q.is_finite() {
        return Err(validation("standardized_delta: non-finite input"));
    }
    if history.iter().any(|h| !h.is_finite()) {
        return Err(validation("standardized_delta: non-finite history entry"));
    }
    if max_entropy <= 0.0 {
        return Err(validation(format!(
            "max entropy must be > 0, got {max_entropy}"
        )));
    }
    if q <= 0.0 {
        return Err(validation(format!("temperature q must be > 0, got {q}")));
    }
    let center = median(history).unwrap_or(current_entropy);
    let ratio =
        ((current_entropy - center) / max_entropy).clamp(-1.0 + ATANH_EPSILON, 1.0 - ATANH_EPSILON);
    Ok(q * ratio.atanh())
}

/// Logistic sigmoid, evaluated without overflow for large `|x|`.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Candidate-pool size `round(10 σ(δ) + 5)`, rounding half away from zero.
pub fn k_from_delta(delta: f64) -> usize {
    let k = (10.0 * sigmoid(delta) + 5.0).round();
    (k as usize).clamp(K_MIN, K_MAX)
}

/// Degeneration-penalty weight `σ(δ)`, clamped to `[ALPHA_MIN, ALPHA_MAX]`.
pub fn alpha_from_delta(delta: f64) -> f64 {
    sigmoid(delta).clamp(ALPHA_MIN, ALPHA_MAX)
}

/// Sign-preserving `exp(|δ|) − 1`, with `|δ|` capped at [`DOUBLE_EXP_CAP`].
pub fn double_exp_delta(delta: f64) -> f64 {
    let magnitude = delta.abs().min(DOUBLE_EXP_CAP);
    (magnitude.exp_m1()).copysign(delta)
}

/// Per-step entropy record used for the running medians.
///
/// Top-k entropies are stored divided by `ln k` of the step that produced them,
/// so steps with different pool sizes stay comparable.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EntropyHistory {
    full_entropies: Vec<f64>,
    topk_entropies_normalized: Vec<f64>,
}

impl EntropyHistory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn full_entropies(&self) -> &[f64] {
        &self.full_entropies
    }

    pub fn topk_entropies_normalized(&self) -> &[f64] {
        &self.topk_entropies_normalized
    }

    pub fn len(&self) -> usize {
        self.full_entropies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.full_entropies.is_empty()
    }

    /// Appends one step: the full entropy in nats and the top-k entropy already
    /// divided by `ln k`.
    pub fn record(&mut self, full_entropy: f64, topk_normalized: f64) -> Result<()> {
        if !full_entropy.is_finite() || full_entropy < 0.0 {
            return Err(validation(format!(
                "full entropy {full_entropy} out of range"
            )));
        }
        if !(0.0..=1.0).contains(&topk_normalized) {
            return Err(validation(format!(
                "normalized top-k entropy {topk_normalized} outside [0, 1]"
            )));
        }
        self.full_entropies.push(full_entropy);
        self.topk_entropies_normalized.push(topk_normalized);
        Ok(())
    }
}

/// The adaptive parameters in force at one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveState {
    pub q: f64,
    pub delta_t: f64,
    pub delta_tk: f64,
    pub k_t: usize,
    pub alpha_t: f64,
}
