//! Token information scores.
//!
//! `self_information[i]` is `-ln P(d_i | d_1..d_{i-1})`. A sequence's score
//! is the *mean* self-information (an averaged negative log-likelihood — no
//! exponentiation). Leave-one-out importance asks how much that mean drops
//! when one token goes away:
//!
//! ```text
//! importance[i] = nll(D) - nll(D without i)
//! ```
//!
//! Low importance marks a token the model predicts almost for free —
//! removing it barely changes the sequence score, which is exactly what the
//! compressor wants to delete first.

use serde::{Deserialize, Serialize};

use crate::backend::ScoringBackend;
use crate::error::{Error, Result};
use crate::types::{remove_positions, Candidate, TokenSeq};

/// Per-position importance scores for one sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ImportanceVector(pub Vec<f64>);

impl ImportanceVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn scores(&self) -> &[f64] {
        &self.0
    }
}

/// Streaming mean. Exact when every addend is the same value, which keeps
/// "uniform model ⇒ importance exactly 0" true at any length; agrees with
/// the naive sum/len mean to ~1e-15 otherwise.
pub(crate) fn mean(values: &[f64]) -> f64 {
    let mut m = 0.0;
    for (i, &v) in values.iter().enumerate() {
        m += (v - m) / (i + 1) as f64;
    }
    m
}

/// `-ln P(token | predecessors)` for each position. Errors on empty input.
pub fn self_information(backend: &dyn ScoringBackend, tokens: &TokenSeq) -> Result<Vec<f64>> {
    Ok(backend.token_logprobs(tokens)?.iter().map(|lp| -lp).collect())
}

/// Mean self-information of the sequence. The empty sequence scores 0 by
/// definition.
pub fn sequence_nll(backend: &dyn ScoringBackend, tokens: &TokenSeq) -> Result<f64> {
    sequence_nll_with_context(backend, &TokenSeq::empty(), tokens)
}

/// [`sequence_nll`] with `context` prepended before scoring. Only the
/// `tokens` positions enter the mean; `context` just conditions them.
pub fn sequence_nll_with_context(
    backend: &dyn ScoringBackend,
    context: &TokenSeq,
    tokens: &TokenSeq,
) -> Result<f64> {
    if tokens.is_empty() {
        return Ok(0.0);
    }
    let logprobs = if context.is_empty() {
        backend.token_logprobs(tokens)?
    } else {
        let full = backend.token_logprobs(&context.concat(tokens))?;
        if full.len() != context.len() + tokens.len() {
            return Err(Error::backend(
                "token_logprobs",
                format!(
                    "expected {} logprobs, got {}",
                    context.len() + tokens.len(),
                    full.len()
                ),
            ));
        }
        full[context.len()..].to_vec()
    };
    let info: Vec<f64> = logprobs.iter().map(|lp| -lp).collect();
    Ok(mean(&info))
}

/// Leave-one-out importance: `nll(D) - nll(D without i)` per position.
///
/// Costs exactly `len + 1` backend scoring passes: one for the full
/// sequence, one per dropped position.
pub fn loo_importance(
    backend: &dyn ScoringBackend,
    tokens: &TokenSeq,
) -> Result<ImportanceVector> {
    loo_importance_with_context(backend, &TokenSeq::empty(), tokens)
}

/// [`loo_importance`] with `context` conditioning every scored sequence.
pub fn loo_importance_with_context(
    backend: &dyn ScoringBackend,
    context: &TokenSeq,
    tokens: &TokenSeq,
) -> Result<ImportanceVector> {
    if tokens.is_empty() {
        return Err(Error::EmptySequence);
    }
    let full = sequence_nll_with_context(backend, context, tokens)?;
    let mut scores = Vec::with_capacity(tokens.len());
    for i in 0..tokens.len() {
        let without = remove_positions(tokens, &Candidate::new(vec![i]))?;
        let loo = sequence_nll_with_context(backend, context, &without)?;
        scores.push(full - loo);
    }
    Ok(ImportanceVector(scores))
}

/// Positions sorted by ascending score; ties break toward the earlier
/// document position.
pub fn rank_ascending(importance: &ImportanceVector) -> Vec<usize> {
    let mut order: Vec<usize> = (0..importance.len()).collect();
    order.sort_by(|&a, &b| {
        importance.0[a]
            .total_cmp(&importance.0[b])
            .then(a.cmp(&b))
    });
    order
}
