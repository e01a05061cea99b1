//! Model interface: per-step distributions and newest-token representations.
//!
//! A backend answers one question: given a context, what is the next-token
//! distribution and what is the hidden representation of the context's last
//! token. Decoders need nothing else, so any inference engine can be wrapped.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{validation, Result};
use crate::prob::ProbabilityDistribution;
use crate::representation::Representation;

mod process;
mod synthetic;
pub mod wire;

pub use process::ProcessBackend;
pub use synthetic::{mix64, SyntheticBackend, SyntheticConfig};

/// Vocabulary index of a token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenId(pub u32);

impl TokenId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<u32> for TokenId {
    fn from(id: u32) -> Self {
        Self(id)
    }
}

impl From<usize> for TokenId {
    fn from(id: usize) -> Self {
        Self(id as u32)
    }
}

impl fmt::Display for TokenId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Wraps raw ids.
pub fn tokens(ids: &[u32]) -> Vec<TokenId> {
    ids.iter().copied().map(TokenId).collect()
}

/// Output of one model evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    /// Distribution over the next token.
    pub dist: ProbabilityDistribution,
    /// Representation of the newest context token.
    pub last_representation: Representation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendDescriptor {
    pub name: String,
    pub vocab_size: usize,
    pub hidden_dim: usize,
}

impl BackendDescriptor {
    pub fn validate(&self) -> Result<()> {
        if self.vocab_size < 2 {
            return Err(validation(format!("vocab_size {} < 2", self.vocab_size)));
        }
        if self.hidden_dim < 1 {
            return Err(validation("hidden_dim must be >= 1"));
        }
        Ok(())
    }
}

/// A language model as seen by the decoders.
///
/// Implementations must be deterministic: the same context always yields the
/// same [`StepOutput`]. Instances are shared across threads; wrappers around
/// stateful engines serialize access internally.
pub trait Backend: Send + Sync {
    fn descriptor(&self) -> BackendDescriptor;

    /// Evaluates a non-empty context.
    fn step(&self, context: &[TokenId]) -> Result<StepOutput>;

    /// `step(context ++ [v])` for each candidate, in candidate order.
    ///
    /// Overrides may batch; results must match the sequential definition.
    fn candidate_outputs(
        &self,
        context: &[TokenId],
        candidates: &[TokenId],
    ) -> Result<Vec<StepOutput>> {
        if candidates.is_empty() {
            return Err(validation("candidate set is empty"));
        }
        let mut extended = Vec::with_capacity(context.len() + 1);
        extended.extend_from_slice(context);
        extended.push(TokenId(0));
        candidates
            .iter()
            .map(|&v| {
                *extended.last_mut().unwrap() = v;
                self.step(&extended)
            })
            .collect()
    }

    /// Representation of each candidate appended to the context.
    fn candidate_representations(
        &self,
        context: &[TokenId],
        candidates: &[TokenId],
    ) -> Result<BTreeMap<TokenId, Representation>> {
        let outputs = self.candidate_outputs(context, candidates)?;
        Ok(candidates
            .iter()
            .copied()
            .zip(outputs.into_iter().map(|o| o.last_representation))
            .collect())
    }
}

impl<B: Backend + ?Sized> Backend for &B {
    fn descriptor(&self) -> BackendDescriptor {
        (**self).descriptor()
    }
    fn step(&self, context: &[TokenId]) -> Result<StepOutput> {
        (**self).step(context)
    }
    fn candidate_outputs(
        &self,
        context: &[TokenId],
        candidates: &[TokenId],
    ) -> Result<Vec<StepOutput>> {
        (**self).candidate_outputs(context, candidates)
    }
}

impl<B: Backend + ?Sized> Backend for Box<B> {
    fn descriptor(&self) -> BackendDescriptor {
        (**self).descriptor()
    }
    fn step(&self, context: &[TokenId]) -> Result<StepOutput> {
        (**self).step(context)
    }
    fn candidate_outputs(
        &self,
        context: &[TokenId],
        candidates: &[TokenId],
    ) -> Result<Vec<StepOutput>> {
        (**self).candidate_outputs(context, candidates)
    }
}

/// Checks a context against a vocabulary size.
pub fn validate_context(context: &[TokenId], vocab_size: usize) -> Result<()> {
    if context.is_empty() {
        return Err(validation("context must be non-empty"));
    }
    if let Some(t) = context.iter().find(|t| t.index() >= vocab_size) {
        return Err(validation(format!(
            "token {t} out of range for vocabulary of {vocab_size}"
        )));
    }
    Ok(())
}

/// Checks that a step output matches the descriptor's sizes.
pub fn validate_output(out: &StepOutput, desc: &BackendDescriptor) -> Result<()> {
    if out.dist.vocab_size() != desc.vocab_size {
        return Err(crate::Error::Contract(format!(
            "backend returned {} probabilities, expected {}",
            out.dist.vocab_size(),
            desc.vocab_size
        )));
    }
    if out.last_representation.dim() != desc.hidden_dim {
        return Err(crate::Error::Contract(format!(
            "backend returned representation of dim {}, expected {}",
            out.last_representation.dim(),
            desc.hidden_dim
        )));
    }
    Ok(())
}
