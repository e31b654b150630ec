//! Adaptive docstring compression for code-generation prompts.
//!
//! Docstrings dominate the token budget of a code-generation prompt, and a
//! large share of those tokens barely move the model. This crate shortens a
//! docstring by repeatedly deleting the windows of least-important tokens
//! that a similarity gate confirms the model does not miss: token importance
//! comes from leave-one-out scoring under a [`backend::ScoringBackend`], and
//! a deletion survives only while the next-token logits after
//! `signature ⧺ docstring` stay within a cosine-similarity floor of the
//! uncompressed reference.
//!
//! The pieces, in pipeline order:
//!
//! - [`types`]: prompts, token sequences, configuration, and results.
//! - [`backend`]: the scoring trait, an HTTP client for it, and in-process
//!   toy models with closed-form behavior for testing.
//! - [`preprocess`]: whitespace normalization, instruction stripping, and
//!   similarity-gated stop-word removal.
//! - [`importance`]: mean self-information scoring and leave-one-out
//!   importance.
//! - [`compressor`]: the removal loop plus random and self-information
//!   baselines.
//! - [`evalkit`]: dataset ingestion, batch runs, and aggregate reports.
//!
//! ```
//! use shortendoc::backend::BigramToy;
//! use shortendoc::compressor::shortendoc_compress;
//! use shortendoc::types::{CompressionConfig, Prompt};
//!
//! let backend = BigramToy::from_corpus(
//!     "sum the values in the list and return the total",
//! )?;
//! let prompt = Prompt::new(
//!     "demo/0",
//!     "def total(xs):",
//!     "sum the values in the list and return the total",
//! )?;
//! let result = shortendoc_compress(&prompt, &backend, &CompressionConfig::default())?;
//! assert!(result.ratio >= 0.0);
//! # Ok::<(), shortendoc::Error>(())
//! ```

pub mod backend;
pub mod compressor;
pub mod error;
pub mod evalkit;
pub mod importance;
pub mod preprocess;
pub mod types;

pub use compressor::{
    build_search_space, constraint_check, random_compress, selfinfo_compress,
    shortendoc_compress, Method,
};
pub use error::{Error, Result};
pub use evalkit::{
    flops_estimate, load_dataset, run_batch, split_prompt, BatchOptions, BatchReport,
    BatchSummary, DatasetFormat, DatasetRecord,
};
pub use types::{CompressionConfig, CompressionResult, Prompt, ResultRecord, TokenSeq};
