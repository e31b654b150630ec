//! The adaptive removal loop and the two fixed-ratio baselines.
//!
//! One round of the loop: score every remaining token by leave-one-out
//! importance, build candidate windows over the `top_n` least important
//! positions, then walk the candidates largest window first (within equal
//! size, least summed importance first). A candidate is accepted when the
//! next-token logits of `signature ⧺ trial` stay within `tau` cosine
//! similarity of the reference logits. Accepted removals recurse — scores
//! are recomputed on the shrunken docstring — and the loop ends on the first
//! round where nothing passes the gate.
//!
//! The reference is the post-preprocessing docstring, fixed for the whole
//! loop (see [`ConstraintReference`] for the drift-prone alternative).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::backend::{cosine_similarity, ScoringBackend};
use crate::error::{Error, Result};
use crate::importance::{
    loo_importance_with_context, rank_ascending, self_information, ImportanceVector,
};
use crate::preprocess::preprocess;
use crate::types::{
    compression_ratio, remove_positions, render_compressed, Candidate, CompressionConfig,
    CompressionResult, ConstraintReference, Prompt, RemovalStep, ScanStrategy, TokenSeq,
};

/// Ordered candidate windows over the least-important positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchSpace {
    /// All windows, singletons first: for `m = min(top_n, len)` kept
    /// positions there are `m(m+1)/2` candidates.
    pub candidates: Vec<Candidate>,
}

/// Build every consecutive window over the first `min(top_n, len)` entries
/// of `sorted_positions` (positions in ascending-importance order).
///
/// Windows are consecutive *in that ordering*, not in the document: the
/// candidate `[sorted[j], …, sorted[j+k-1]]` groups the j-th through
/// (j+k-1)-th least important tokens.
pub fn build_search_space(sorted_positions: &[usize], top_n: usize) -> Result<SearchSpace> {
    if top_n == 0 {
        return Err(Error::InvalidConfig("top_n must be at least 1".into()));
    }
    if sorted_positions.is_empty() {
        return Err(Error::NothingToCompress);
    }
    let top = &sorted_positions[..top_n.min(sorted_positions.len())];
    let m = top.len();
    let mut candidates = Vec::with_capacity(m * (m + 1) / 2);
    for k in 1..=m {
        for j in 0..=m - k {
            candidates.push(Candidate::new(top[j..j + k].to_vec()));
        }
    }
    Ok(SearchSpace { candidates })
}

/// Outcome of one similarity check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintOutcome {
    pub similarity: f64,
    pub holds: bool,
}

/// Compare next-token logits of `signature ⧺ trial` against those of
/// `signature ⧺ reference`; the gate holds when cosine similarity ≥ `tau`.
pub fn constraint_check(
    backend: &dyn ScoringBackend,
    signature: &TokenSeq,
    reference: &TokenSeq,
    trial: &TokenSeq,
    tau: f64,
) -> Result<ConstraintOutcome> {
    let reference_logits = backend.next_token_logits(&signature.concat(reference))?;
    similarity_against(backend, &reference_logits, signature, trial, tau)
}

/// [`constraint_check`] with the reference logits already in hand; this is
/// what lets the loop spend one backend call per candidate.
fn similarity_against(
    backend: &dyn ScoringBackend,
    reference_logits: &[f64],
    signature: &TokenSeq,
    trial: &TokenSeq,
    tau: f64,
) -> Result<ConstraintOutcome> {
    let trial_logits = backend.next_token_logits(&signature.concat(trial))?;
    let similarity = cosine_similarity(reference_logits, &trial_logits)?;
    Ok(ConstraintOutcome {
        similarity,
        holds: similarity >= tau,
    })
}

/// Which compressor a run applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// The adaptive loop above.
    ShortenDoc,
    /// Seeded uniform removal at a fixed ratio.
    Random,
    /// One-shot removal of the lowest self-information tokens.
    SelfInfo,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::ShortenDoc => "shortendoc",
            Method::Random => "random",
            Method::SelfInfo => "selfinfo",
        })
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shortendoc" => Ok(Method::ShortenDoc),
            "random" => Ok(Method::Random),
            "selfinfo" => Ok(Method::SelfInfo),
            other => Err(Error::InvalidConfig(format!(
                "unknown method {other:?} (expected shortendoc, random, or selfinfo)"
            ))),
        }
    }
}

/// Tokenized inputs shared by all three compressors.
struct Prologue {
    raw_len: usize,
    pre_text: String,
    reference: TokenSeq,
    signature: TokenSeq,
}

fn prologue(
    prompt: &Prompt,
    backend: &dyn ScoringBackend,
    cfg: &CompressionConfig,
) -> Result<Prologue> {
    cfg.validate()?;
    let raw = backend
        .tokenize(&prompt.docstring)
        .map_err(|e| Error::stage("tokenize", e))?;
    let pre = preprocess(&prompt.docstring, backend, cfg)
        .map_err(|e| Error::stage("preprocess", e))?;
    let reference = backend
        .tokenize(&pre.text)
        .map_err(|e| Error::stage("tokenize", e))?;
    let signature = backend
        .tokenize(&prompt.signature)
        .map_err(|e| Error::stage("tokenize", e))?;
    Ok(Prologue {
        raw_len: raw.len(),
        pre_text: pre.text,
        reference,
        signature,
    })
}

fn assemble(
    prompt: &Prompt,
    raw_len: usize,
    pre_text: String,
    working: &TokenSeq,
    trace: Vec<RemovalStep>,
    final_similarity: Option<f64>,
    skipped_reason: Option<String>,
) -> Result<CompressionResult> {
    let ratio = if raw_len == 0 {
        0.0
    } else {
        compression_ratio(raw_len, working.len()).map_err(|e| Error::stage("ratio", e))?
    };
    Ok(CompressionResult {
        original_docstring: prompt.docstring.clone(),
        preprocessed_docstring: pre_text,
        compressed_docstring: render_compressed(working),
        ratio,
        final_similarity,
        trace,
        original_tokens: raw_len,
        compressed_tokens: working.len(),
        skipped_reason,
    })
}

/// Candidate order for one round: largest window first, then least summed
/// importance, then enumeration order.
fn scan_order(space: &SearchSpace, importance: &ImportanceVector) -> Vec<usize> {
    let totals: Vec<f64> = space
        .candidates
        .iter()
        .map(|c| c.positions.iter().map(|&p| importance.scores()[p]).sum())
        .collect();
    let mut order: Vec<usize> = (0..space.candidates.len()).collect();
    order.sort_by(|&a, &b| {
        space.candidates[b]
            .len()
            .cmp(&space.candidates[a].len())
            .then(totals[a].total_cmp(&totals[b]))
            .then(a.cmp(&b))
    });
    order
}

/// Adaptive compression: repeatedly remove the least-important window that
/// keeps next-token logits within `cfg.tau` of the reference.
pub fn shortendoc_compress(
    prompt: &Prompt,
    backend: &dyn ScoringBackend,
    cfg: &CompressionConfig,
) -> Result<CompressionResult> {
    let pro = prologue(prompt, backend, cfg)?;
    let mut working = pro.reference.clone();

    if working.len() < 2 {
        return assemble(
            prompt,
            pro.raw_len,
            pro.pre_text,
            &working,
            Vec::new(),
            None,
            Some("docstring shorter than two tokens after preprocessing".into()),
        );
    }

    let context = if cfg.condition_on_signature {
        pro.signature.clone()
    } else {
        TokenSeq::empty()
    };
    let mut reference_seq = pro.reference.clone();
    let mut reference_logits = backend
        .next_token_logits(&pro.signature.concat(&reference_seq))
        .map_err(|e| Error::stage("constraint", e))?;
    let mut trace: Vec<RemovalStep> = Vec::new();

    loop {
        if working.is_empty() {
            break;
        }
        if let Some(max) = cfg.max_steps {
            if trace.len() >= max {
                break;
            }
        }
        if cfg.reference == ConstraintReference::CurrentWorking && !trace.is_empty() {
            reference_seq = working.clone();
            reference_logits = backend
                .next_token_logits(&pro.signature.concat(&reference_seq))
                .map_err(|e| Error::stage("constraint", e))?;
        }

        let importance = loo_importance_with_context(backend, &context, &working)
            .map_err(|e| Error::stage("importance", e))?;
        let order = rank_ascending(&importance);
        let space = build_search_space(&order, cfg.top_n)?;
        let scan = scan_order(&space, &importance);

        // Accept-first stops at the first satisfier; best-of-round checks
        // the whole round and keeps the earliest satisfier in scan order,
        // which by construction is a largest, least-important one.
        let mut accepted: Option<(usize, TokenSeq, f64)> = None;
        for idx in scan {
            let candidate = &space.candidates[idx];
            let trial = remove_positions(&working, candidate)?;
            let outcome =
                similarity_against(backend, &reference_logits, &pro.signature, &trial, cfg.tau)
                    .map_err(|e| Error::stage("constraint", e))?;
            if outcome.holds && accepted.is_none() {
                accepted = Some((idx, trial, outcome.similarity));
                if cfg.strategy == ScanStrategy::AcceptFirst {
                    break;
                }
            }
        }

        let Some((idx, trial, similarity)) = accepted else {
            break;
        };
        let candidate = space.candidates[idx].clone();
        let removed_surfaces = candidate
            .positions
            .iter()
            .map(|&p| working.surfaces()[p].clone())
            .collect();
        trace.push(RemovalStep {
            candidate,
            removed_surfaces,
            similarity_at_acceptance: similarity,
            tokens_before: working.len(),
            tokens_after: trial.len(),
        });
        working = trial;
    }

    let final_similarity = if trace.is_empty() {
        None
    } else {
        let outcome = constraint_check(backend, &pro.signature, &reference_seq, &working, cfg.tau)
            .map_err(|e| Error::stage("constraint", e))?;
        if !outcome.holds {
            return Err(Error::ConstraintViolated {
                similarity: outcome.similarity,
                tau: cfg.tau,
            });
        }
        Some(outcome.similarity)
    };

    assemble(
        prompt,
        pro.raw_len,
        pro.pre_text,
        &working,
        trace,
        final_similarity,
        None,
    )
}

fn validate_removal_ratio(ratio: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&ratio) {
        return Err(Error::InvalidConfig(format!(
            "removal ratio must be in [0, 1], got {ratio}"
        )));
    }
    Ok(())
}

/// Finish a baseline: remove `positions` (ascending) in one recorded step.
fn one_shot(
    prompt: &Prompt,
    backend: &dyn ScoringBackend,
    pro: Prologue,
    positions: Vec<usize>,
) -> Result<CompressionResult> {
    if positions.is_empty() {
        return assemble(
            prompt,
            pro.raw_len,
            pro.pre_text,
            &pro.reference,
            Vec::new(),
            None,
            None,
        );
    }
    let candidate = Candidate::new(positions);
    let trial = remove_positions(&pro.reference, &candidate)?;
    // Baselines skip the gate but still report the similarity they land on.
    let outcome = constraint_check(backend, &pro.signature, &pro.reference, &trial, 0.0)
        .map_err(|e| Error::stage("constraint", e))?;
    let removed_surfaces = candidate
        .positions
        .iter()
        .map(|&p| pro.reference.surfaces()[p].clone())
        .collect();
    let step = RemovalStep {
        candidate,
        removed_surfaces,
        similarity_at_acceptance: outcome.similarity,
        tokens_before: pro.reference.len(),
        tokens_after: trial.len(),
    };
    assemble(
        prompt,
        pro.raw_len,
        pro.pre_text,
        &trial,
        vec![step],
        Some(outcome.similarity),
        None,
    )
}

/// Baseline: remove `floor(ratio · len)` positions chosen uniformly without
/// replacement by a seeded generator. Deterministic for a fixed seed.
pub fn random_compress(
    prompt: &Prompt,
    backend: &dyn ScoringBackend,
    cfg: &CompressionConfig,
    ratio: f64,
    seed: u64,
) -> Result<CompressionResult> {
    validate_removal_ratio(ratio)?;
    let pro = prologue(prompt, backend, cfg)?;
    let count = (ratio * pro.reference.len() as f64).floor() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut positions = rand::seq::index::sample(&mut rng, pro.reference.len(), count).into_vec();
    positions.sort_unstable();
    one_shot(prompt, backend, pro, positions)
}

/// Baseline: remove the `floor(ratio · len)` lowest self-information
/// positions (ties toward the earlier position) in one shot, no gate.
pub fn selfinfo_compress(
    prompt: &Prompt,
    backend: &dyn ScoringBackend,
    cfg: &CompressionConfig,
    ratio: f64,
) -> Result<CompressionResult> {
    validate_removal_ratio(ratio)?;
    let pro = prologue(prompt, backend, cfg)?;
    let count = (ratio * pro.reference.len() as f64).floor() as usize;
    let mut positions = if count == 0 {
        Vec::new()
    } else {
        let info = self_information(backend, &pro.reference)
            .map_err(|e| Error::stage("importance", e))?;
        let ranked = rank_ascending(&ImportanceVector(info));
        ranked[..count].to_vec()
    };
    positions.sort_unstable();
    one_shot(prompt, backend, pro, positions)
}
