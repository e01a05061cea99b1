//! Contrastive search with fixed or entropy-adapted `(k, α)`.
//!
//! A candidate `v` from the top-`k` set scores
//! `(1 − α) · p(v) − α · max_j cos(h_v, h_j)`, where the max runs over every
//! context token so far. The adaptive rule recomputes `k` from the standardized
//! full-vocabulary entropy and `α` from the standardized top-`k` entropy at every
//! step, each centered on the median of past steps.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::backend::{Backend, StepOutput, TokenId};
use crate::error::{argument, Error, Result};
use crate::prob::{
    alpha_from_delta, double_exp_delta, k_from_delta, shannon_entropy, standardized_delta,
    subset_entropy, top_k_indices, AdaptiveState, EntropyHistory, ProbabilityDistribution,
};
use crate::representation::{degeneration_penalty, ContextRepresentations, Representation};

use super::TraceRecord;

/// How the top-k entropy deviation is turned into `α`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdaptiveVariant {
    /// `α = σ(δ)`.
    #[default]
    Standard,
    /// `α = σ(sign(δ) · (e^|δ| − 1))`, pushing `α` toward 0 or 1.
    DoubleExp,
}

/// Winner of one contrastive step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Selection {
    pub token: TokenId,
    /// `p(token)` under the step distribution.
    pub confidence: f64,
    /// Degeneration penalty of the winner.
    pub penalty: f64,
}

/// Argmax of `(1 − α) p − α · penalty` over `(token, p, penalty)` triples,
/// lowest token id on ties.
pub fn select_by_score(scored: &[(TokenId, f64, f64)], alpha: f64) -> Option<Selection> {
    let mut best: Option<(f64, Selection)> = None;
    for &(token, confidence, penalty) in scored {
        let score = (1.0 - alpha) * confidence - alpha * penalty;
        let better = match &best {
            None => true,
            Some((s, sel)) => score > *s || (score == *s && token < sel.token),
        };
        if better {
            best = Some((
                score,
                Selection {
                    token,
                    confidence,
                    penalty,
                },
            ));
        }
    }
    best.map(|(_, s)| s)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(argument(format!("alpha = {alpha} outside [0, 1]")));
    }
    Ok(())
}

fn select_among(
    dist: &ProbabilityDistribution,
    candidates: &[usize],
    candidate_reps: &BTreeMap<TokenId, Representation>,
    context_reps: &ContextRepresentations,
    alpha: f64,
) -> Result<Selection> {
    let scored = candidates
        .iter()
        .map(|&i| {
            let token = TokenId::from(i);
            let rep = candidate_reps.get(&token).ok_or_else(|| {
                Error::Contract(format!("no representation supplied for candidate {token}"))
            })?;
            Ok((token, dist.get(i), degeneration_penalty(rep, context_reps)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(select_by_score(&scored, alpha).expect("non-empty candidate set"))
}

/// One contrastive-search step over the top-`k` tokens of `dist`.
///
/// `candidate_reps` must hold a representation for every top-`k` token.
pub fn contrastive_step(
    dist: &ProbabilityDistribution,
    candidate_reps: &BTreeMap<TokenId, Representation>,
    context_reps: &ContextRepresentations,
    k: usize,
    alpha: f64,
) -> Result<Selection> {
    check_alpha(alpha)?;
    let candidates = top_k_indices(dist, k)?;
    select_among(dist, &candidates, candidate_reps, context_reps, alpha)
}

/// Entropy measurements and parameters for one adaptive step.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveParameters {
    pub state: AdaptiveState,
    /// Full-vocabulary entropy, nats.
    pub full_entropy: f64,
    /// Entropy of the renormalized top-`k_t` distribution, nats.
    pub topk_entropy: f64,
    /// The top-`k_t` token ids in rank order.
    pub candidates: Vec<usize>,
}

impl AdaptiveParameters {
    /// Top-k entropy divided by `ln k_t`, as stored in the history.
    pub fn topk_normalized(&self) -> f64 {
        (self.topk_entropy / (self.candidates.len() as f64).ln()).clamp(0.0, 1.0)
    }
}

/// Computes `(k_t, α_t)` for a step without touching the history.
///
/// `k_t` is capped at the vocabulary size for vocabularies under 15 tokens.
pub fn adaptive_parameters(
    dist: &ProbabilityDistribution,
    history: &EntropyHistory,
    q: f64,
    variant: AdaptiveVariant,
) -> Result<AdaptiveParameters> {
    let full_entropy = shannon_entropy(dist);
    let delta_t = standardized_delta(
        full_entropy,
        history.full_entropies(),
        dist.max_entropy(),
        q,
    )?;
    let k_t = k_from_delta(delta_t).min(dist.vocab_size());

    let candidates = top_k_indices(dist, k_t)?;
    let topk_entropy = if k_t == dist.vocab_size() {
        shannon_entropy(dist)
    } else {
        subset_entropy(dist, &candidates)
    };
    let normalized = (topk_entropy / (k_t as f64).ln()).clamp(0.0, 1.0);
    let delta_tk = standardized_delta(normalized, history.topk_entropies_normalized(), 1.0, q)?;
    let alpha_t = alpha_from_delta(match variant {
        AdaptiveVariant::Standard => delta_tk,
        AdaptiveVariant::DoubleExp => double_exp_delta(delta_tk),
    });

    Ok(AdaptiveParameters {
        state: AdaptiveState {
            q,
            delta_t,
            delta_tk,
            k_t,
            alpha_t,
        },
        full_entropy,
        topk_entropy,
        candidates,
    })
}

/// Result of a contrastive step run against a backend.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub selection: Selection,
    pub record: TraceRecord,
    /// `step(context ++ [token])`, reused for the next step's distribution and
    /// the new context representation.
    pub chosen_output: StepOutput,
}

fn run_candidates(
    backend: &dyn Backend,
    context: &[TokenId],
    dist: &ProbabilityDistribution,
    candidates: &[usize],
    context_reps: &ContextRepresentations,
    alpha: f64,
) -> Result<(Selection, StepOutput)> {
    let ids: Vec<TokenId> = candidates.iter().map(|&i| TokenId::from(i)).collect();
    let mut outputs = backend.candidate_outputs(context, &ids)?;
    if outputs.len() != ids.len() {
        return Err(Error::Contract(format!(
            "backend returned {} candidate outputs for {} candidates",
            outputs.len(),
            ids.len()
        )));
    }
    let reps: BTreeMap<TokenId, Representation> = ids
        .iter()
        .zip(&outputs)
        .map(|(&t, o)| (t, o.last_representation.clone()))
        .collect();
    let selection = select_among(dist, candidates, &reps, context_reps, alpha)?;
    let idx = ids.iter().position(|&t| t == selection.token).unwrap();
    Ok((selection, outputs.swap_remove(idx)))
}

/// Fixed-`(k, α)` contrastive step against a backend.
pub fn fixed_contrastive_step(
    dist: &ProbabilityDistribution,
    backend: &dyn Backend,
    context: &[TokenId],
    context_reps: &ContextRepresentations,
    k: usize,
    alpha: f64,
    step: usize,
) -> Result<StepOutcome> {
    check_alpha(alpha)?;
    let candidates = top_k_indices(dist, k)?;
    let (selection, chosen_output) =
        run_candidates(backend, context, dist, &candidates, context_reps, alpha)?;
    let record = TraceRecord {
        step,
        chosen: selection.token,
        full_entropy: shannon_entropy(dist),
        topk_entropy: Some(subset_entropy(dist, &candidates)),
        delta_t: None,
        delta_tk: None,
        k_t: Some(k),
        alpha_t: Some(alpha),
        model_confidence: selection.confidence,
        penalty: Some(selection.penalty),
    };
    Ok(StepOutcome {
        selection,
        record,
        chosen_output,
    })
}

/// Adaptive contrastive step: measure, center, scale, select; then append this
/// step's entropies to `history`.
#[allow(clippy::too_many_arguments)]
pub fn adaptive_contrastive_step(
    dist: &ProbabilityDistribution,
    backend: &dyn Backend,
    context: &[TokenId],
    context_reps: &ContextRepresentations,
    history: &mut EntropyHistory,
    q: f64,
    variant: AdaptiveVariant,
    step: usize,
) -> Result<StepOutcome> {
    let params = adaptive_parameters(dist, history, q, variant)?;
    let (selection, chosen_output) = run_candidates(
        backend,
        context,
        dist,
        &params.candidates,
        context_reps,
        params.state.alpha_t,
    )?;
    history.record(params.full_entropy, params.topk_normalized())?;
    let record = TraceRecord {
        step,
        chosen: selection.token,
        full_entropy: params.full_entropy,
        topk_entropy: Some(params.topk_entropy),
        delta_t: Some(params.state.delta_t),
        delta_tk: Some(params.state.delta_tk),
        k_t: Some(params.state.k_t),
        alpha_t: Some(params.state.alpha_t),
        model_confidence: selection.confidence,
        penalty: Some(selection.penalty),
    };
    Ok(StepOutcome {
        selection,
        record,
        chosen_output,
    })
}
