//! Domain types shared by every stage: prompts, token sequences, removal
//! candidates, configuration, and compression results.
//!
//! A [`TokenSeq`] pairs token ids with their surface pieces. Surfaces keep
//! their leading whitespace, so concatenating them verbatim reconstructs the
//! source text; rendering a compressed sequence applies one whitespace
//! collapse on top of that concatenation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A code-generation prompt split into its two parts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prompt {
    /// Function header plus any imports or preamble, ending at the header colon.
    pub signature: String,
    /// Natural-language body between the docstring quotes. May be empty.
    pub docstring: String,
    /// Dataset identifier, e.g. `HumanEval/0`.
    pub task_id: String,
    /// Language hint carried through to reports.
    pub language_tag: String,
}

impl Prompt {
    /// Build a prompt, rejecting an empty signature.
    pub fn new(
        task_id: impl Into<String>,
        signature: impl Into<String>,
        docstring: impl Into<String>,
    ) -> Result<Self> {
        let signature = signature.into();
        if signature.trim().is_empty() {
            return Err(Error::InvalidPrompt("empty signature".into()));
        }
        Ok(Prompt {
            signature,
            docstring: docstring.into(),
            task_id: task_id.into(),
            language_tag: "python".into(),
        })
    }
}

/// A tokenized text: parallel ids and surface pieces.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TokenSeq {
    ids: Vec<u32>,
    surfaces: Vec<String>,
}

impl TokenSeq {
    /// Pair ids with surfaces, rejecting mismatched lengths.
    pub fn new(ids: Vec<u32>, surfaces: Vec<String>) -> Result<Self> {
        if ids.len() != surfaces.len() {
            return Err(Error::LengthMismatch {
                ids: ids.len(),
                surfaces: surfaces.len(),
            });
        }
        Ok(TokenSeq { ids, surfaces })
    }

    /// The empty sequence.
    pub fn empty() -> Self {
        TokenSeq::default()
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn surfaces(&self) -> &[String] {
        &self.surfaces
    }

    /// Concatenate two sequences.
    pub fn concat(&self, other: &TokenSeq) -> TokenSeq {
        let mut ids = self.ids.clone();
        ids.extend_from_slice(&other.ids);
        let mut surfaces = self.surfaces.clone();
        surfaces.extend_from_slice(&other.surfaces);
        TokenSeq { ids, surfaces }
    }

    /// Surface pieces joined verbatim. Inverse of tokenization.
    pub fn surface_text(&self) -> String {
        self.surfaces.concat()
    }
}

/// Positions slated for removal in one step.
///
/// The list keeps whatever ordering produced it (importance order for the
/// adaptive compressor, ascending for the baselines); removal treats it as a
/// set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Candidate {
    pub positions: Vec<usize>,
}

impl Candidate {
    pub fn new(positions: Vec<usize>) -> Self {
        Candidate { positions }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Check that positions are distinct and inside a sequence of `len` tokens.
    pub fn validate(&self, len: usize) -> Result<()> {
        let mut seen = vec![false; len];
        for &p in &self.positions {
            if p >= len {
                return Err(Error::InvalidCandidate(format!(
                    "position {p} out of range for length {len}"
                )));
            }
            if seen[p] {
                return Err(Error::InvalidCandidate(format!("position {p} repeats")));
            }
            seen[p] = true;
        }
        Ok(())
    }
}

/// Remove the candidate's positions from a sequence, keeping order.
pub fn remove_positions(seq: &TokenSeq, candidate: &Candidate) -> Result<TokenSeq> {
    candidate.validate(seq.len())?;
    let mut drop = vec![false; seq.len()];
    for &p in &candidate.positions {
        drop[p] = true;
    }
    let mut ids = Vec::with_capacity(seq.len() - candidate.len());
    let mut surfaces = Vec::with_capacity(seq.len() - candidate.len());
    for (i, (&id, surface)) in seq.ids.iter().zip(&seq.surfaces).enumerate() {
        if !drop[i] {
            ids.push(id);
            surfaces.push(surface.clone());
        }
    }
    Ok(TokenSeq { ids, surfaces })
}

/// Whole-pipeline compression ratio: `1 - compressed/original` token counts.
pub fn compression_ratio(original: usize, compressed: usize) -> Result<f64> {
    if original == 0 {
        return Err(Error::EmptyOriginal);
    }
    if compressed > original {
        return Err(Error::NotACompression {
            original,
            compressed,
        });
    }
    Ok(1.0 - compressed as f64 / original as f64)
}

/// True when `needle` is a (not necessarily contiguous) subsequence of `hay`.
pub fn is_id_subsequence(needle: &[u32], hay: &[u32]) -> bool {
    let mut it = hay.iter();
    needle.iter().all(|n| it.any(|h| h == n))
}

/// Collapse every whitespace run to a single space and trim the ends.
pub fn collapse_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Render a compressed sequence: concatenate retained surfaces verbatim,
/// then apply a single whitespace collapse.
pub fn render_compressed(seq: &TokenSeq) -> String {
    collapse_whitespace(&seq.surface_text())
}

/// Logarithm base for information scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogBase {
    /// Natural logarithm. The only supported base.
    #[default]
    Natural,
}

/// How the removal loop walks each round's candidates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScanStrategy {
    /// Take the first candidate that clears the gate.
    #[default]
    AcceptFirst,
    /// Evaluate the whole round and take the largest candidate that clears it.
    BestOfRound,
}

/// What the similarity gate compares trial docstrings against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstraintReference {
    /// The post-preprocessing docstring, fixed for the whole loop.
    #[default]
    Preprocessed,
    /// The current working docstring at the start of each round. Permits
    /// drift: step-local similarity stays high while the output wanders from
    /// the original.
    CurrentWorking,
}

/// Tuning knobs for preprocessing and the removal loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CompressionConfig {
    /// Similarity floor a removal must clear.
    pub tau: f64,
    /// How many least-important positions seed the candidate search.
    pub top_n: usize,
    /// Words eligible for gated removal during preprocessing.
    pub stop_words: Vec<String>,
    /// Similarity floor for each stop-word removal.
    pub stopword_sim_threshold: f64,
    /// Literal instruction prefixes stripped once, case-insensitively.
    /// Empty by default; dataset ingestion may supply them.
    pub strip_instructions: Vec<String>,
    /// Logarithm base for information scores.
    pub log_base: LogBase,
    /// Cap on accepted removal steps. `None` means unbounded.
    pub max_steps: Option<usize>,
    /// Score docstring tokens conditioned on the signature as context.
    pub condition_on_signature: bool,
    /// Candidate acceptance strategy within a round.
    pub strategy: ScanStrategy,
    /// Reference the similarity gate compares against.
    pub reference: ConstraintReference,
}

impl Default for CompressionConfig {
    fn default() -> Self {
        CompressionConfig {
            tau: 0.999,
            top_n: 10,
            stop_words: crate::preprocess::default_stop_words(),
            stopword_sim_threshold: 0.999,
            strip_instructions: Vec::new(),
            log_base: LogBase::Natural,
            max_steps: None,
            condition_on_signature: false,
            strategy: ScanStrategy::AcceptFirst,
            reference: ConstraintReference::Preprocessed,
        }
    }
}

impl CompressionConfig {
    /// Reject out-of-range knobs.
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "tau must be in (0, 1], got {}",
                self.tau
            )));
        }
        if self.top_n == 0 {
            return Err(Error::InvalidConfig("top_n must be at least 1".into()));
        }
        if !(self.stopword_sim_threshold > 0.0 && self.stopword_sim_threshold <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "stopword_sim_threshold must be in (0, 1], got {}",
                self.stopword_sim_threshold
            )));
        }
        if self.max_steps == Some(0) {
            return Err(Error::InvalidConfig(
                "max_steps must be positive or unset".into(),
            ));
        }
        Ok(())
    }
}

/// One accepted removal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemovalStep {
    /// Positions removed from the working sequence at this step.
    #[serde(rename = "candidate_positions")]
    pub candidate: Candidate,
    /// Surface pieces of the removed tokens, in candidate order.
    pub removed_surfaces: Vec<String>,
    /// Similarity the gate measured when it accepted this step.
    #[serde(rename = "similarity")]
    pub similarity_at_acceptance: f64,
    /// Working-sequence length before the removal.
    pub tokens_before: usize,
    /// Working-sequence length after the removal.
    pub tokens_after: usize,
}

/// Outcome of one docstring compression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressionResult {
    /// Docstring as it arrived.
    pub original_docstring: String,
    /// Docstring after whitespace, instruction, and stop-word preprocessing.
    pub preprocessed_docstring: String,
    /// Docstring after the removal loop.
    pub compressed_docstring: String,
    /// `1 - compressed/original` over token counts of the raw original, so
    /// preprocessing savings count. 0 when the original itself has no tokens.
    pub ratio: f64,
    /// Similarity of the final output against the reference; absent when no
    /// removal step ran.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_similarity: Option<f64>,
    /// Accepted removals, in order.
    pub trace: Vec<RemovalStep>,
    /// Token count of the raw original docstring.
    pub original_tokens: usize,
    /// Token count of the compressed docstring.
    pub compressed_tokens: usize,
    /// Set when the removal loop was bypassed (e.g. fewer than two tokens
    /// left after preprocessing).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skipped_reason: Option<String>,
}

/// One results-file line: a task id plus its compression outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub task_id: String,
    #[serde(flatten)]
    pub result: CompressionResult,
}

impl ResultRecord {
    /// Serialize to a single JSONL line (no trailing newline).
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("result records serialize")
    }

    /// Parse one JSONL line.
    pub fn from_json_line(line: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(line)
    }
}
