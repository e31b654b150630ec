//! Scoring backends: the language-model surface the compressor needs.
//!
//! Everything upstream is expressed against [`ScoringBackend`], so the same
//! loop runs over the in-process toys (fast, exactly reproducible, used as
//! test oracles) and over a real model behind [`RemoteBackend`]'s HTTP
//! protocol. Log quantities are natural logarithms throughout.

mod remote;
mod toys;

pub use remote::RemoteBackend;
pub use toys::{BigramToy, ConstantToy, PrefixToy, UniformToy};

use crate::error::{Error, Result};
use crate::types::TokenSeq;

/// What the compressor needs from a language model.
///
/// Implementations must be deterministic: identical inputs produce identical
/// outputs, call after call.
pub trait ScoringBackend: Send + Sync {
    /// Split text into tokens. Surface pieces keep their leading whitespace
    /// so concatenating them verbatim reproduces the input.
    fn tokenize(&self, text: &str) -> Result<TokenSeq>;

    /// Reconstruct text from a token sequence.
    fn detokenize(&self, tokens: &TokenSeq) -> Result<String> {
        Ok(tokens.surface_text())
    }

    /// Natural-log probability of each token given its predecessors, starting
    /// from the backend's start context. Output length equals input length;
    /// every entry is ≤ 0. Empty input is an error.
    fn token_logprobs(&self, tokens: &TokenSeq) -> Result<Vec<f64>>;

    /// Next-token distribution (log-probabilities or raw logits) after
    /// consuming `prefix`. The empty prefix means the start context. The
    /// dimension is fixed per backend.
    fn next_token_logits(&self, prefix: &TokenSeq) -> Result<Vec<f64>>;

    /// Document embedding used by the stop-word similarity gate. Empty input
    /// is an error.
    fn doc_embedding(&self, tokens: &TokenSeq) -> Result<Vec<f64>>;
}

/// Cosine similarity of two equal-dimension vectors.
///
/// Computed as `dot / sqrt(|a|² · |b|²)` so comparing a vector with itself
/// yields exactly 1.0. The result is clamped to [-1, 1].
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Err(Error::DegenerateVector);
    }
    Ok((dot / (na * nb).sqrt()).clamp(-1.0, 1.0))
}

/// Split text into word pieces that keep their leading whitespace, so that
/// concatenating the pieces reproduces the input exactly. Trailing
/// whitespace attaches to the last piece; all-whitespace text yields none.
pub(crate) fn split_surfaces(text: &str) -> Vec<String> {
    let mut pieces: Vec<String> = Vec::new();
    let mut current = String::new();
    let mut has_word = false;
    for ch in text.chars() {
        if ch.is_whitespace() {
            if has_word {
                pieces.push(std::mem::take(&mut current));
                has_word = false;
            }
            current.push(ch);
        } else {
            current.push(ch);
            has_word = true;
        }
    }
    if has_word {
        pieces.push(current);
    } else if !current.is_empty() {
        if let Some(last) = pieces.last_mut() {
            last.push_str(&current);
        }
    }
    pieces
}

/// The word inside a surface piece, without its attached whitespace.
pub(crate) fn surface_word(piece: &str) -> &str {
    piece.trim()
}

/// FNV-1a over bytes; the stable hash behind the toy tokenizers.
pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Deterministic pseudo-vector component in [-1, 1] for (token id, axis).
pub(crate) fn hash_component(id: u32, axis: usize) -> f64 {
    let mut h = fnv1a(&id.to_le_bytes());
    h ^= (axis as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    h = h.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h ^= h >> 31;
    (h as f64 / u64::MAX as f64) * 2.0 - 1.0
}
