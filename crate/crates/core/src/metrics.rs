//! Automatic evaluation: n-gram diversity, prompt/continuation coherence, speed.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::backend::{Backend, TokenId};
use crate::decoders::GenerationResult;
use crate::error::{validation, Result};
use crate::representation::{cosine_similarity, Representation};

/// N-gram orders aggregated by [`diversity`].
pub const NGRAM_ORDERS: [usize; 3] = [2, 3, 4];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversityReport {
    /// `1 − unique/total` per n-gram order.
    pub rep_n: BTreeMap<usize, f64>,
    /// `∏ₙ unique/total` over n = 2, 3, 4.
    pub diversity: f64,
}

/// `(unique, total)` n-gram counts.
pub fn ngram_counts(tokens: &[TokenId], n: usize) -> (usize, usize) {
    if tokens.len() < n || n == 0 {
        return (0, 0);
    }
    let unique: HashSet<&[TokenId]> = tokens.windows(n).collect();
    (unique.len(), tokens.len() - n + 1)
}

/// Diversity of a continuation. Needs at least 5 tokens.
pub fn diversity(tokens: &[TokenId]) -> Result<DiversityReport> {
    if tokens.len() < 5 {
        return Err(validation(format!(
            "diversity needs at least 5 tokens, got {}",
            tokens.len()
        )));
    }
    let mut rep_n = BTreeMap::new();
    let mut product = 1.0;
    for n in NGRAM_ORDERS {
        let (unique, total) = ngram_counts(tokens, n);
        let ratio = unique as f64 / total as f64;
        rep_n.insert(n, 1.0 - ratio);
        product *= ratio;
    }
    Ok(DiversityReport {
        rep_n,
        diversity: product,
    })
}

/// Sentence-embedding model used by [`coherence`].
pub trait Embedder {
    fn embed(&self, tokens: &[TokenId]) -> Result<Representation>;
}

/// Mean of a backend's newest-token representations over every prefix of the
/// input.
pub struct MeanRepresentationEmbedder<'a> {
    backend: &'a dyn Backend,
}

impl<'a> MeanRepresentationEmbedder<'a> {
    pub fn new(backend: &'a dyn Backend) -> Self {
        Self { backend }
    }
}

impl Embedder for MeanRepresentationEmbedder<'_> {
    fn embed(&self, tokens: &[TokenId]) -> Result<Representation> {
        if tokens.is_empty() {
            return Err(validation("cannot embed an empty sequence"));
        }
        let dim = self.backend.descriptor().hidden_dim;
        let mut sum = vec![0.0; dim];
        for j in 1..=tokens.len() {
            let rep = self.backend.step(&tokens[..j])?.last_representation;
            sum.iter_mut().zip(rep.values()).for_each(|(s, v)| *s += v);
        }
        let n = tokens.len() as f64;
        Representation::new(sum.into_iter().map(|s| s / n).collect())
    }
}

/// Cosine similarity between prompt and continuation embeddings.
pub fn coherence(
    prompt: &[TokenId],
    continuation: &[TokenId],
    embedder: &dyn Embedder,
) -> Result<f64> {
    if prompt.is_empty() || continuation.is_empty() {
        return Err(validation(
            "coherence needs non-empty prompt and continuation",
        ));
    }
    cosine_similarity(&embedder.embed(prompt)?, &embedder.embed(continuation)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedSummary {
    pub mean_seconds_per_generation: f64,
    pub mean_tokens_per_second: f64,
}

/// Arithmetic means of elapsed time and throughput.
pub fn speed_summary(results: &[GenerationResult]) -> Result<SpeedSummary> {
    speed_summary_from(
        results
            .iter()
            .map(|r| (r.elapsed_seconds, r.tokens_per_second)),
    )
}

/// [`speed_summary`] over raw `(seconds, tokens_per_second)` pairs.
pub fn speed_summary_from(pairs: impl IntoIterator<Item = (f64, f64)>) -> Result<SpeedSummary> {
    let (mut secs, mut tps, mut n) = (0.0, 0.0, 0usize);
    for (s, t) in pairs {
        secs += s;
        tps += t;
        n += 1;
    }
    if n == 0 {
        return Err(validation("speed summary of an empty result list"));
    }
    Ok(SpeedSummary {
        mean_seconds_per_generation: secs / n as f64,
        mean_tokens_per_second: tps / n as f64,
    })
}
