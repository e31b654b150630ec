//! Docstring preprocessing: whitespace normalization, optional instruction
//! stripping, and similarity-gated stop-word removal.
//!
//! The stages run in that order. Stop-word removal is conservative: every
//! tentative removal is checked against the *original* docstring's embedding
//! and kept only when similarity stays at or above the configured threshold.

use serde::{Deserialize, Serialize};

use crate::backend::{cosine_similarity, ScoringBackend};
use crate::error::{Error, Result};
use crate::types::CompressionConfig;

/// Words eligible for gated removal when no custom list is configured.
pub fn default_stop_words() -> Vec<String> {
    [
        "the", "The", "a", "A", "an", "that", "and", "are", "is", "of", "to", "which", "where",
        "there", "then", "this", "This", "any", "you", "You",
    ]
    .into_iter()
    .map(String::from)
    .collect()
}

/// Instruction prefixes stripped from MBPP-style task text.
pub fn mbpp_instruction_patterns() -> Vec<String> {
    vec![
        "Write a python function to".into(),
        "Write a function to".into(),
    ]
}

/// Replace every whitespace run containing a line break or tab with a single
/// space and trim the ends. Runs of plain spaces are left alone.
pub fn normalize_whitespace(doc: &str) -> String {
    let mut out = String::with_capacity(doc.len());
    let mut run = String::new();
    let mut run_breaks = false;
    for ch in doc.chars() {
        if ch.is_whitespace() {
            run.push(ch);
            if ch == '\n' || ch == '\r' || ch == '\t' {
                run_breaks = true;
            }
        } else {
            if !run.is_empty() {
                if run_breaks {
                    out.push(' ');
                } else {
                    out.push_str(&run);
                }
                run.clear();
                run_breaks = false;
            }
            out.push(ch);
        }
    }
    // A trailing whitespace run is dropped by the final trim either way.
    out.trim().to_string()
}

/// Remove the first matching instruction prefix, once. Patterns are literal
/// and matched case-insensitively at the very start of the docstring.
pub fn strip_instructions(doc: &str, patterns: &[String]) -> String {
    for pattern in patterns {
        if pattern.is_empty() {
            continue;
        }
        if let Some(head) = doc.get(..pattern.len()) {
            if head.eq_ignore_ascii_case(pattern) {
                return doc[pattern.len()..].trim_start().to_string();
            }
        }
    }
    doc.to_string()
}

/// One stop word the gate let out, with the similarity recorded at removal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StopWordRemoval {
    /// Index of the word in the docstring's whitespace-delimited word list.
    pub word_index: usize,
    pub word: String,
    pub similarity: f64,
}

/// Gated stop-word removal, returning the surviving text and the removal
/// trace.
///
/// Scans whitespace-delimited words left to right. Each exact (case
/// sensitive) stop-list match is tentatively dropped from the current
/// version; the drop sticks only when the embedding similarity between the
/// *original* docstring and the tentative version stays at or above
/// `threshold`. A removal that would empty the docstring is never taken.
pub fn remove_stop_words_traced(
    doc: &str,
    backend: &dyn ScoringBackend,
    stop_words: &[String],
    threshold: f64,
) -> Result<(String, Vec<StopWordRemoval>)> {
    let words: Vec<&str> = doc.split_whitespace().collect();
    if words.is_empty() || stop_words.is_empty() {
        return Ok((doc.to_string(), Vec::new()));
    }
    let is_stop = |w: &str| stop_words.iter().any(|s| s == w);
    if !words.iter().any(|w| is_stop(w)) {
        return Ok((doc.to_string(), Vec::new()));
    }

    let reference = backend.doc_embedding(&backend.tokenize(doc)?)?;
    let mut kept = vec![true; words.len()];
    let mut removals = Vec::new();
    for (i, word) in words.iter().enumerate() {
        if !is_stop(word) {
            continue;
        }
        let tentative: Vec<&str> = words
            .iter()
            .enumerate()
            .filter(|&(j, _)| kept[j] && j != i)
            .map(|(_, w)| *w)
            .collect();
        if tentative.is_empty() {
            continue;
        }
        let text = tentative.join(" ");
        let similarity = (|| -> Result<f64> {
            let emb = backend.doc_embedding(&backend.tokenize(&text)?)?;
            cosine_similarity(&reference, &emb)
        })()
        .map_err(|source| Error::StopWordGate {
            position: i,
            source: Box::new(source),
        })?;
        if similarity >= threshold {
            kept[i] = false;
            removals.push(StopWordRemoval {
                word_index: i,
                word: (*word).to_string(),
                similarity,
            });
        }
    }
    if removals.is_empty() {
        return Ok((doc.to_string(), Vec::new()));
    }
    let text = words
        .iter()
        .enumerate()
        .filter(|&(j, _)| kept[j])
        .map(|(_, w)| *w)
        .collect::<Vec<_>>()
        .join(" ");
    Ok((text, removals))
}

/// [`remove_stop_words_traced`] without the trace.
pub fn remove_stop_words(
    doc: &str,
    backend: &dyn ScoringBackend,
    stop_words: &[String],
    threshold: f64,
) -> Result<String> {
    remove_stop_words_traced(doc, backend, stop_words, threshold).map(|(text, _)| text)
}

/// Output of the full preprocessing pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct Preprocessed {
    pub text: String,
    pub stop_word_trace: Vec<StopWordRemoval>,
}

/// Run the pipeline: normalize whitespace, strip instruction prefixes, then
/// gated stop-word removal.
pub fn preprocess(
    doc: &str,
    backend: &dyn ScoringBackend,
    cfg: &CompressionConfig,
) -> Result<Preprocessed> {
    let text = normalize_whitespace(doc);
    let text = strip_instructions(&text, &cfg.strip_instructions);
    let (text, stop_word_trace) = remove_stop_words_traced(
        &text,
        backend,
        &cfg.stop_words,
        cfg.stopword_sim_threshold,
    )?;
    Ok(Preprocessed {
        text,
        stop_word_trace,
    })
}
