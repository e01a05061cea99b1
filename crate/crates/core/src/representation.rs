//! Token representations, cosine similarity and the degeneration penalty.

use serde::{Deserialize, Serialize};

use crate::error::{validation, Result};

/// Tolerance on the Euclidean norm of a vector treated as unit-length.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-9;

/// A dense hidden-state vector for one token in context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Representation {
    values: Vec<f64>,
}

impl Representation {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(validation("representation must have dim >= 1"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(validation("representation has non-finite entries"));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum()
    }

    /// Unit-norm copy. Fails on the zero vector.
    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 {
            return Err(validation("cannot normalize a zero vector"));
        }
        Ok(Self {
            values: self.values.iter().map(|v| v / n).collect(),
        })
    }

    pub fn is_unit(&self) -> bool {
        (self.norm() - 1.0).abs() <= UNIT_NORM_TOLERANCE
    }
}

impl TryFrom<Vec<f64>> for Representation {
    type Error = crate::Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<Representation> for Vec<f64> {
    fn from(r: Representation) -> Self {
        r.values
    }
}

/// Representations of every context token so far, prompt tokens included.
#[derive(Debug, Clone, Default)]
pub struct ContextRepresentations {
    items: Vec<Representation>,
    // Euclidean norm of each item, computed exactly as `Representation::norm`.
    norms: Vec<f64>,
}

impl ContextRepresentations {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, rep: Representation) -> Result<()> {
        if let Some(first) = self.items.first() {
            if first.dim() != rep.dim() {
                return Err(validation(format!(
                    "context dim {} but got representation of dim {}",
                    first.dim(),
                    rep.dim()
                )));
            }
        }
        self.norms.push(rep.norm());
        self.items.push(rep);
        Ok(())
    }

    pub fn items(&self) -> &[Representation] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

impl TryFrom<Vec<Representation>> for ContextRepresentations {
    type Error = crate::Error;

    fn try_from(items: Vec<Representation>) -> Result<Self> {
        let mut ctx = Self::new();
        for rep in items {
            ctx.push(rep)?;
        }
        Ok(ctx)
    }
}

/// Cosine similarity, clamped to `[−1, 1]`.
pub fn cosine_similarity(a: &Representation, b: &Representation) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(validation(format!(
            "dimension mismatch: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Err(validation("cosine similarity of a zero vector"));
    }
    Ok((a.dot(b) / (na * nb)).clamp(-1.0, 1.0))
}

/// Maximum cosine similarity between `candidate` and any context representation.
/// Zero for an empty context.
pub fn degeneration_penalty(
    candidate: &Representation,
    context: &ContextRepresentations,
) -> Result<f64> {
    if context.is_empty() {
        return Ok(0.0);
    }
    let na = candidate.norm();
    if na == 0.0 {
        return Err(validation("cosine similarity of a zero vector"));
    }
    let mut best = f64::NEG_INFINITY;
    for (c, &nb) in context.items.iter().zip(&context.norms) {
        if c.dim() != candidate.dim() {
            return Err(validation(format!(
                "dimension mismatch: {} vs {}",
                candidate.dim(),
                c.dim()
            )));
        }
        if nb == 0.0 {
            return Err(validation("cosine similarity of a zero vector"));
        }
        best = best.max((candidate.dot(c) / (na * nb)).clamp(-1.0, 1.0));
    }
    Ok(best)
}

/// Evaluates both sides of `s(a, b) = 1 − ‖a − b‖² / 2` for unit vectors.
///
/// Returns `(cosine, distance_form)`; these agree to rounding error.
pub fn tikhonov_identity_check(a: &Representation, b: &Representation) -> Result<(f64, f64)> {
    if !a.is_unit() || !b.is_unit() {
        return Err(validation("identity check requires unit-normalized inputs"));
    }
    let cosine = cosine_similarity(a, b)?;
    let dist_sq: f64 = a
        .values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok((cosine, 1.0 - dist_sq / 2.0))
}
