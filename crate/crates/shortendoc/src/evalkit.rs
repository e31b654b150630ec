//! Dataset ingestion, batch compression, and aggregate reporting.
//!
//! Two line-oriented JSON dataset shapes are understood: records carrying a
//! full prompt whose docstring sits between triple quotes under a `def`
//! header (`prompt` field), and records carrying a bare task description
//! (`text` field) for which a header is synthesized. [`run_batch`] compresses
//! every record, isolates per-record failures, and aggregates ratios and a
//! FLOPs estimate into a [`BatchSummary`].

use std::collections::HashSet;
use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;

use serde::{Deserialize, Serialize};

use crate::backend::{fnv1a, ScoringBackend};
use crate::compressor::{random_compress, selfinfo_compress, shortendoc_compress, Method};
use crate::error::{Error, Result};
use crate::importance::mean;
use crate::preprocess::mbpp_instruction_patterns;
use crate::types::{CompressionConfig, CompressionResult, Prompt, ResultRecord};

/// Shape of a dataset's JSONL records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetFormat {
    /// Records carry a `prompt`: a function header followed by a
    /// triple-quoted docstring.
    Humaneval,
    /// Records carry a `text`: a bare task description with no code.
    Mbpp,
}

impl std::str::FromStr for DatasetFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "humaneval" => Ok(DatasetFormat::Humaneval),
            "mbpp" => Ok(DatasetFormat::Mbpp),
            other => Err(Error::InvalidConfig(format!(
                "unknown dataset format {other:?} (expected humaneval or mbpp)"
            ))),
        }
    }
}

/// One dataset entry, still unsplit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetRecord {
    pub task_id: String,
    /// The prompt (`prompt` field) or task description (`text` field).
    pub raw: String,
    /// Signature override derived at load time (e.g. from an `entry_point`
    /// or `code` field); takes precedence over the synthesized header.
    pub header: Option<String>,
}

/// Split a raw prompt into `(signature, docstring)`.
///
/// For header-style prompts the signature is everything up to and including
/// the last `:` between the final `def`/`async def` line and the docstring's
/// opening triple quote, and the docstring is the text strictly between the
/// quotes. A prompt with no triple quote at all yields an empty docstring.
/// Description-style records get a synthesized `def solution():` header with
/// the whole text as docstring.
pub fn split_prompt(raw: &str, format: DatasetFormat) -> Result<(String, String)> {
    match format {
        DatasetFormat::Humaneval => split_header_prompt(raw),
        DatasetFormat::Mbpp => Ok(("def solution():".to_string(), raw.to_string())),
    }
}

fn split_header_prompt(raw: &str) -> Result<(String, String)> {
    let double = raw.find("\"\"\"");
    let single = raw.find("'''");
    let opening = match (double, single) {
        (Some(d), Some(s)) => Some(if d < s { (d, "\"\"\"") } else { (s, "'''") }),
        (Some(d), None) => Some((d, "\"\"\"")),
        (None, Some(s)) => Some((s, "'''")),
        (None, None) => None,
    };
    match opening {
        None => {
            let colon_end = last_def_colon(raw, raw.len())?;
            Ok((raw[..colon_end].to_string(), String::new()))
        }
        Some((open, quote)) => {
            let body_start = open + quote.len();
            let close = raw[body_start..]
                .find(quote)
                .ok_or(Error::MalformedDocstring)?
                + body_start;
            let colon_end = last_def_colon(raw, open)?;
            Ok((
                raw[..colon_end].to_string(),
                raw[body_start..close].to_string(),
            ))
        }
    }
}

/// Byte index just past the header colon of the last `def`/`async def` line
/// starting before `before`. The colon searched for is the last one between
/// that line's start and `before`, which covers headers that span lines.
fn last_def_colon(raw: &str, before: usize) -> Result<usize> {
    let mut best: Option<usize> = None;
    let mut line_start = 0usize;
    for line in raw.split_inclusive('\n') {
        if line_start >= before {
            break;
        }
        let trimmed = line.trim_start();
        if trimmed.starts_with("def ") || trimmed.starts_with("async def ") {
            if let Some(rel) = raw[line_start..before].rfind(':') {
                best = Some(line_start + rel + 1);
            }
        }
        line_start += line.len();
    }
    best.ok_or(Error::NoSignature)
}

/// Load a JSONL dataset. Blank lines are skipped; a task id may be a JSON
/// string or number. Duplicate ids and unparseable lines are errors.
pub fn load_dataset(path: &Path, format: DatasetFormat) -> Result<Vec<DatasetRecord>> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value =
            serde_json::from_str(line).map_err(|e| Error::MalformedLine {
                line: lineno,
                message: e.to_string(),
            })?;
        let task_id = match value.get("task_id") {
            Some(serde_json::Value::String(s)) => s.clone(),
            Some(serde_json::Value::Number(n)) => n.to_string(),
            _ => {
                return Err(Error::MalformedLine {
                    line: lineno,
                    message: "missing or non-scalar task_id".into(),
                })
            }
        };
        if !seen.insert(task_id.clone()) {
            return Err(Error::DuplicateTaskId(task_id));
        }
        let field = match format {
            DatasetFormat::Humaneval => "prompt",
            DatasetFormat::Mbpp => "text",
        };
        let raw = match value.get(field) {
            Some(serde_json::Value::String(s)) => s.clone(),
            _ => {
                return Err(Error::MalformedLine {
                    line: lineno,
                    message: format!("missing string field {field:?}"),
                })
            }
        };
        let header = match format {
            DatasetFormat::Humaneval => None,
            DatasetFormat::Mbpp => derive_mbpp_header(&value),
        };
        records.push(DatasetRecord {
            task_id,
            raw,
            header,
        });
    }
    Ok(records)
}

/// Prefer an `entry_point` name; otherwise reuse the first `def` line of an
/// accompanying `code` field.
fn derive_mbpp_header(value: &serde_json::Value) -> Option<String> {
    if let Some(serde_json::Value::String(name)) = value.get("entry_point") {
        if !name.trim().is_empty() {
            return Some(format!("def {}():", name.trim()));
        }
    }
    if let Some(serde_json::Value::String(code)) = value.get("code") {
        for line in code.lines() {
            let trimmed = line.trim_start();
            if trimmed.starts_with("def ") || trimmed.starts_with("async def ") {
                if let Some(colon) = trimmed.rfind(':') {
                    return Some(trimmed[..=colon].to_string());
                }
            }
        }
    }
    None
}

/// `2 · params · tokens`, the standard per-token inference cost model.
/// Zero on either side is a configuration error, not a zero estimate.
pub fn flops_estimate(model_params: u64, token_count: u64) -> Result<f64> {
    if model_params == 0 {
        return Err(Error::InvalidConfig(
            "model parameter count must be positive".into(),
        ));
    }
    if token_count == 0 {
        return Err(Error::InvalidConfig("token count must be positive".into()));
    }
    Ok(2.0 * model_params as f64 * token_count as f64)
}

/// Knobs for one batch run.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchOptions {
    /// Which compressor to apply.
    pub method: Method,
    /// Removal ratio for the fixed-ratio baselines.
    pub match_ratio: f64,
    /// Base seed; each record mixes in its task id so runs are reproducible
    /// without every record sharing one removal pattern.
    pub seed: u64,
    /// Worker threads. Outcomes keep input order regardless.
    pub concurrency: usize,
    /// Model size the FLOPs estimate assumes.
    pub model_params: u64,
    /// Dataset label echoed into the summary.
    pub dataset_name: String,
}

impl Default for BatchOptions {
    fn default() -> Self {
        BatchOptions {
            method: Method::ShortenDoc,
            match_ratio: 0.3,
            seed: 0,
            concurrency: 1,
            model_params: 1_300_000_000,
            dataset_name: "dataset".into(),
        }
    }
}

impl BatchOptions {
    /// Reject out-of-range knobs.
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.match_ratio) {
            return Err(Error::InvalidConfig(format!(
                "match ratio must be in [0, 1], got {}",
                self.match_ratio
            )));
        }
        if self.model_params == 0 {
            return Err(Error::InvalidConfig(
                "model parameter count must be positive".into(),
            ));
        }
        if self.concurrency == 0 {
            return Err(Error::InvalidConfig(
                "concurrency must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Per-record result: the compression, or the error message that stopped it.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordOutcome {
    pub task_id: String,
    pub outcome: std::result::Result<CompressionResult, String>,
}

/// Aggregates over one batch run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub method: Method,
    pub dataset: String,
    /// Records attempted, successes and failures together.
    pub n: usize,
    /// Mean compression ratio over successful records.
    pub mean_ratio: f64,
    /// Median compression ratio over successful records (midpoint average
    /// for an even count).
    pub median_ratio: f64,
    pub failures: usize,
    /// Estimated FLOPs to consume every original docstring once.
    pub flops_raw_estimate: f64,
    /// Same estimate over the compressed docstrings.
    pub flops_compressed_estimate: f64,
}

/// Everything a batch run produced: per-record outcomes in input order plus
/// the aggregate summary.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchReport {
    pub outcomes: Vec<RecordOutcome>,
    pub summary: BatchSummary,
}

impl BatchReport {
    /// Successful outcomes as writable result records, input order kept.
    pub fn success_records(&self) -> Vec<ResultRecord> {
        self.outcomes
            .iter()
            .filter_map(|o| {
                o.outcome.as_ref().ok().map(|result| ResultRecord {
                    task_id: o.task_id.clone(),
                    result: result.clone(),
                })
            })
            .collect()
    }
}

/// Aggregate result records into a summary. `n` is the number of records
/// attempted, so `n - results.len()` failures are implied.
pub fn summarize(
    method: Method,
    dataset: &str,
    n: usize,
    results: &[ResultRecord],
    model_params: u64,
) -> Result<BatchSummary> {
    if results.len() > n {
        return Err(Error::InvalidConfig(format!(
            "{} results exceed {n} attempted records",
            results.len()
        )));
    }
    if model_params == 0 {
        return Err(Error::InvalidConfig(
            "model parameter count must be positive".into(),
        ));
    }
    let ratios: Vec<f64> = results.iter().map(|r| r.result.ratio).collect();
    let raw_tokens: u64 = results.iter().map(|r| r.result.original_tokens as u64).sum();
    let compressed_tokens: u64 = results
        .iter()
        .map(|r| r.result.compressed_tokens as u64)
        .sum();
    Ok(BatchSummary {
        method,
        dataset: dataset.to_string(),
        n,
        mean_ratio: mean(&ratios),
        median_ratio: median(ratios),
        failures: n - results.len(),
        flops_raw_estimate: token_flops(model_params, raw_tokens)?,
        flops_compressed_estimate: token_flops(model_params, compressed_tokens)?,
    })
}

/// FLOPs for a token total that may legitimately be zero (empty batch or
/// fully compressed output).
fn token_flops(model_params: u64, tokens: u64) -> Result<f64> {
    if tokens == 0 {
        Ok(0.0)
    } else {
        flops_estimate(model_params, tokens)
    }
}

/// Mean compression ratio over result records; 0 for an empty slice.
pub fn mean_ratio(results: &[ResultRecord]) -> f64 {
    let ratios: Vec<f64> = results.iter().map(|r| r.result.ratio).collect();
    mean(&ratios)
}

/// Median compression ratio over result records; 0 for an empty slice.
pub fn median_ratio(results: &[ResultRecord]) -> f64 {
    median(results.iter().map(|r| r.result.ratio).collect())
}

/// `(raw, compressed)` FLOPs estimates over summed token counts.
pub fn flops_for_results(results: &[ResultRecord], model_params: u64) -> Result<(f64, f64)> {
    let raw: u64 = results.iter().map(|r| r.result.original_tokens as u64).sum();
    let compressed: u64 = results
        .iter()
        .map(|r| r.result.compressed_tokens as u64)
        .sum();
    Ok((
        token_flops(model_params, raw)?,
        token_flops(model_params, compressed)?,
    ))
}

fn median(mut values: Vec<f64>) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        values[mid]
    } else {
        (values[mid - 1] + values[mid]) / 2.0
    }
}

/// Compress every record with the configured method.
///
/// The backend is probed once up front so a dead endpoint fails the batch
/// immediately; after that, per-record errors only mark that record failed.
/// Worker threads pull records off a shared index, but outcomes are reported
/// in input order and each record's result is independent of scheduling.
pub fn run_batch(
    records: &[DatasetRecord],
    format: DatasetFormat,
    backend: &dyn ScoringBackend,
    cfg: &CompressionConfig,
    opts: &BatchOptions,
) -> Result<BatchReport> {
    cfg.validate()?;
    opts.validate()?;
    backend.tokenize("ping")?;

    // Description-style records open with a fixed instruction; strip it
    // unless the caller already chose patterns.
    let mut effective = cfg.clone();
    if format == DatasetFormat::Mbpp && effective.strip_instructions.is_empty() {
        effective.strip_instructions = mbpp_instruction_patterns();
    }

    let outcomes = if opts.concurrency == 1 || records.len() <= 1 {
        records
            .iter()
            .map(|r| process_record(r, format, backend, &effective, opts))
            .collect()
    } else {
        let next = AtomicUsize::new(0);
        let (tx, rx) = mpsc::channel();
        std::thread::scope(|s| {
            for _ in 0..opts.concurrency.min(records.len()) {
                let tx = tx.clone();
                let next = &next;
                let effective = &effective;
                s.spawn(move || loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    if i >= records.len() {
                        break;
                    }
                    let outcome = process_record(&records[i], format, backend, effective, opts);
                    if tx.send((i, outcome)).is_err() {
                        break;
                    }
                });
            }
        });
        drop(tx);
        let mut slots: Vec<Option<RecordOutcome>> = records.iter().map(|_| None).collect();
        for (i, outcome) in rx {
            slots[i] = Some(outcome);
        }
        slots
            .into_iter()
            .map(|slot| slot.expect("every record processed"))
            .collect::<Vec<_>>()
    };

    let results: Vec<ResultRecord> = outcomes
        .iter()
        .filter_map(|o| {
            o.outcome.as_ref().ok().map(|result| ResultRecord {
                task_id: o.task_id.clone(),
                result: result.clone(),
            })
        })
        .collect();
    let summary = summarize(
        opts.method,
        &opts.dataset_name,
        records.len(),
        &results,
        opts.model_params,
    )?;
    Ok(BatchReport { outcomes, summary })
}

fn process_record(
    record: &DatasetRecord,
    format: DatasetFormat,
    backend: &dyn ScoringBackend,
    cfg: &CompressionConfig,
    opts: &BatchOptions,
) -> RecordOutcome {
    let run = || -> Result<CompressionResult> {
        let (signature, docstring) = split_prompt(&record.raw, format)?;
        let signature = record.header.clone().unwrap_or(signature);
        let prompt = Prompt::new(&record.task_id, signature, docstring)?;
        match opts.method {
            Method::ShortenDoc => shortendoc_compress(&prompt, backend, cfg),
            Method::Random => {
                let seed = opts.seed ^ fnv1a(record.task_id.as_bytes());
                random_compress(&prompt, backend, cfg, opts.match_ratio, seed)
            }
            Method::SelfInfo => selfinfo_compress(&prompt, backend, cfg, opts.match_ratio),
        }
    };
    RecordOutcome {
        task_id: record.task_id.clone(),
        outcome: run().map_err(|e| e.to_string()),
    }
}

/// Write result records as JSONL, either truncating or appending.
pub fn write_results(path: &Path, records: &[ResultRecord], append: bool) -> Result<()> {
    let io = |source: std::io::Error| Error::Io {
        path: path.display().to_string(),
        source,
    };
    let mut file = std::fs::OpenOptions::new()
        .create(true)
        .write(true)
        .append(append)
        .truncate(!append)
        .open(path)
        .map_err(io)?;
    for record in records {
        writeln!(file, "{}", record.to_json_line()).map_err(io)?;
    }
    Ok(())
}

/// Read a JSONL results file, skipping blank lines.
pub fn read_results(path: &Path) -> Result<Vec<ResultRecord>> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut records = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record = ResultRecord::from_json_line(line).map_err(|e| Error::MalformedLine {
            line: idx + 1,
            message: e.to_string(),
        })?;
        records.push(record);
    }
    Ok(records)
}

/// Write a summary as pretty-printed JSON.
pub fn write_summary(path: &Path, summary: &BatchSummary) -> Result<()> {
    let body = serde_json::to_string_pretty(summary).expect("summaries serialize");
    std::fs::write(path, body + "\n").map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::BigramToy;
    use crate::error::Error;

    fn toy() -> BigramToy {
        BigramToy::from_corpus(
            "adds two numbers and returns the result \
             write a python function to sum the values in the list \
             check whether the number is even and return true",
        )
        .unwrap()
    }

    const PROMPT: &str = "def add_numbers(a, b):\n    \"\"\"\n    Adds two numbers and returns the result.\n\n    >>> add_numbers(2, 3)\n    5\n    \"\"\"\n";

    #[test]
    fn splits_header_and_docstring() {
        let (sig, doc) = split_prompt(PROMPT, DatasetFormat::Humaneval).unwrap();
        assert_eq!(sig, "def add_numbers(a, b):");
        assert!(doc
            .trim_start()
            .starts_with("Adds two numbers and returns the result."));
        assert!(!doc.contains("\"\"\""));
    }

    #[test]
    fn split_keeps_preamble_in_signature() {
        let raw = "import math\n\ndef area(r):\n    \"\"\"Circle area.\"\"\"\n";
        let (sig, doc) = split_prompt(raw, DatasetFormat::Humaneval).unwrap();
        assert_eq!(sig, "import math\n\ndef area(r):");
        assert_eq!(doc, "Circle area.");
    }

    #[test]
    fn split_handles_single_quotes_and_picks_first_quote_kind() {
        let raw = "def f():\n    '''one \"\"\"two\"\"\" three'''\n";
        let (_, doc) = split_prompt(raw, DatasetFormat::Humaneval).unwrap();
        assert_eq!(doc, "one \"\"\"two\"\"\" three");
    }

    #[test]
    fn split_without_docstring_yields_empty() {
        let raw = "def f(x):\n";
        let (sig, doc) = split_prompt(raw, DatasetFormat::Humaneval).unwrap();
        assert_eq!(sig, "def f(x):");
        assert_eq!(doc, "");
    }

    #[test]
    fn split_uses_last_def_before_docstring() {
        let raw = "def helper(x):\n    return x\n\ndef target(y):\n    \"\"\"Doubles y.\"\"\"\n";
        let (sig, _) = split_prompt(raw, DatasetFormat::Humaneval).unwrap();
        assert!(sig.ends_with("def target(y):"));
    }

    #[test]
    fn split_handles_multiline_header() {
        let raw = "def f(\n    x: int,\n) -> int:\n    \"\"\"Identity.\"\"\"\n";
        let (sig, doc) = split_prompt(raw, DatasetFormat::Humaneval).unwrap();
        assert_eq!(sig, "def f(\n    x: int,\n) -> int:");
        assert_eq!(doc, "Identity.");
    }

    #[test]
    fn split_rejects_unterminated_docstring() {
        let raw = "def f():\n    \"\"\"Never closed\n";
        assert!(matches!(
            split_prompt(raw, DatasetFormat::Humaneval),
            Err(Error::MalformedDocstring)
        ));
    }

    #[test]
    fn split_rejects_missing_header() {
        assert!(matches!(
            split_prompt("just text, no function", DatasetFormat::Humaneval),
            Err(Error::NoSignature)
        ));
        let quote_first = "\"\"\"doc\"\"\"\ndef f():\n";
        assert!(matches!(
            split_prompt(quote_first, DatasetFormat::Humaneval),
            Err(Error::NoSignature)
        ));
    }

    #[test]
    fn split_synthesizes_description_header() {
        let raw = "Write a python function to sum the values in the list.";
        let (sig, doc) = split_prompt(raw, DatasetFormat::Mbpp).unwrap();
        assert_eq!(sig, "def solution():");
        assert_eq!(doc, raw);
    }

    fn write_lines(lines: &[&str]) -> tempfile::NamedTempFile {
        let file = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(file.path(), lines.join("\n")).unwrap();
        file
    }

    #[test]
    fn loads_header_style_dataset() {
        let file = write_lines(&[
            r#"{"task_id": "T/0", "prompt": "def a():\n    \"\"\"x\"\"\"\n"}"#,
            "",
            r#"{"task_id": 7, "prompt": "def b():\n"}"#,
        ]);
        let records = load_dataset(file.path(), DatasetFormat::Humaneval).unwrap();
        assert_eq!(records.len(), 2);
        assert_eq!(records[0].task_id, "T/0");
        assert_eq!(records[1].task_id, "7");
        assert!(records[0].header.is_none());
    }

    #[test]
    fn load_rejects_duplicates_and_malformed_lines() {
        let dup = write_lines(&[
            r#"{"task_id": "T/0", "prompt": "def a():\n"}"#,
            r#"{"task_id": "T/0", "prompt": "def b():\n"}"#,
        ]);
        assert!(matches!(
            load_dataset(dup.path(), DatasetFormat::Humaneval),
            Err(Error::DuplicateTaskId(id)) if id == "T/0"
        ));

        let bad_json = write_lines(&[r#"{"task_id": "T/0""#]);
        assert!(matches!(
            load_dataset(bad_json.path(), DatasetFormat::Humaneval),
            Err(Error::MalformedLine { line: 1, .. })
        ));

        let missing_field = write_lines(&[
            r#"{"task_id": "T/0", "prompt": "def a():\n"}"#,
            r#"{"task_id": "T/1"}"#,
        ]);
        assert!(matches!(
            load_dataset(missing_field.path(), DatasetFormat::Humaneval),
            Err(Error::MalformedLine { line: 2, .. })
        ));

        let missing_id = write_lines(&[r#"{"prompt": "def a():\n"}"#]);
        assert!(matches!(
            load_dataset(missing_id.path(), DatasetFormat::Humaneval),
            Err(Error::MalformedLine { line: 1, .. })
        ));
    }

    #[test]
    fn load_derives_description_headers() {
        let file = write_lines(&[
            r#"{"task_id": 1, "text": "Sum the values.", "code": "def my_sum(xs):\n    return sum(xs)\n"}"#,
            r#"{"task_id": 2, "text": "Check parity.", "entry_point": "is_even", "code": "def other():\n    pass\n"}"#,
            r#"{"task_id": 3, "text": "No code at all."}"#,
        ]);
        let records = load_dataset(file.path(), DatasetFormat::Mbpp).unwrap();
        assert_eq!(records[0].header.as_deref(), Some("def my_sum(xs):"));
        assert_eq!(records[1].header.as_deref(), Some("def is_even():"));
        assert_eq!(records[2].header, None);
    }

    #[test]
    fn flops_follows_two_params_tokens() {
        let flops = flops_estimate(1_300_000_000, 100).unwrap();
        assert_eq!(flops, 2.6e11);
        assert!(flops_estimate(0, 100).is_err());
        assert!(flops_estimate(100, 0).is_err());
    }

    fn record_with(task_id: &str, ratio: f64, original: usize, compressed: usize) -> ResultRecord {
        ResultRecord {
            task_id: task_id.into(),
            result: CompressionResult {
                original_docstring: String::new(),
                preprocessed_docstring: String::new(),
                compressed_docstring: String::new(),
                ratio,
                final_similarity: None,
                trace: Vec::new(),
                original_tokens: original,
                compressed_tokens: compressed,
                skipped_reason: None,
            },
        }
    }

    #[test]
    fn summarize_aggregates_mean_median_failures_and_flops() {
        let results = vec![
            record_with("a", 0.2, 10, 8),
            record_with("b", 0.4, 10, 6),
            record_with("c", 0.9, 10, 1),
            record_with("d", 0.1, 10, 9),
        ];
        let summary = summarize(Method::ShortenDoc, "demo", 5, &results, 1_000).unwrap();
        assert_eq!(summary.n, 5);
        assert_eq!(summary.failures, 1);
        assert!((summary.mean_ratio - 0.4).abs() < 1e-12);
        assert!((summary.median_ratio - 0.3).abs() < 1e-12, "midpoint of 0.2 and 0.4");
        assert_eq!(summary.flops_raw_estimate, 2.0 * 1_000.0 * 40.0);
        assert_eq!(summary.flops_compressed_estimate, 2.0 * 1_000.0 * 24.0);
    }

    #[test]
    fn summarize_handles_empty_and_odd_counts() {
        let empty = summarize(Method::Random, "demo", 0, &[], 1_000).unwrap();
        assert_eq!(empty.mean_ratio, 0.0);
        assert_eq!(empty.median_ratio, 0.0);
        assert_eq!(empty.flops_raw_estimate, 0.0);

        let odd = vec![
            record_with("a", 0.9, 5, 1),
            record_with("b", 0.1, 5, 4),
            record_with("c", 0.5, 5, 2),
        ];
        let summary = summarize(Method::Random, "demo", 3, &odd, 1_000).unwrap();
        assert_eq!(summary.median_ratio, 0.5);

        assert!(summarize(Method::Random, "demo", 1, &odd, 1_000).is_err());
        assert!(summarize(Method::Random, "demo", 3, &odd, 0).is_err());
    }

    fn batch_records() -> Vec<DatasetRecord> {
        let prompts = [
            (
                "T/0",
                "def total(xs):\n    \"\"\"sum the values in the list and return the result\"\"\"\n",
            ),
            (
                "T/1",
                "def even(n):\n    \"\"\"check whether the number is even and return true\"\"\"\n",
            ),
            (
                "T/2",
                "def first(xs):\n    \"\"\"the values in the list\"\"\"\n",
            ),
        ];
        prompts
            .iter()
            .map(|(id, raw)| DatasetRecord {
                task_id: id.to_string(),
                raw: raw.to_string(),
                header: None,
            })
            .collect()
    }

    #[test]
    fn run_batch_compresses_every_record() {
        let backend = toy();
        let records = batch_records();
        let opts = BatchOptions {
            dataset_name: "demo".into(),
            ..BatchOptions::default()
        };
        let report = run_batch(
            &records,
            DatasetFormat::Humaneval,
            &backend,
            &CompressionConfig::default(),
            &opts,
        )
        .unwrap();
        assert_eq!(report.outcomes.len(), 3);
        assert_eq!(report.summary.n, 3);
        assert_eq!(report.summary.failures, 0);
        assert_eq!(report.summary.dataset, "demo");
        let ids: Vec<&str> = report.outcomes.iter().map(|o| o.task_id.as_str()).collect();
        assert_eq!(ids, ["T/0", "T/1", "T/2"], "input order kept");
        assert!((0.0..=1.0).contains(&report.summary.mean_ratio));
        assert!(report.summary.flops_compressed_estimate <= report.summary.flops_raw_estimate);
    }

    #[test]
    fn run_batch_isolates_record_failures() {
        let backend = toy();
        let mut records = batch_records();
        records.push(DatasetRecord {
            task_id: "T/bad".into(),
            raw: "no function header here".into(),
            header: None,
        });
        let report = run_batch(
            &records,
            DatasetFormat::Humaneval,
            &backend,
            &CompressionConfig::default(),
            &BatchOptions::default(),
        )
        .unwrap();
        assert_eq!(report.summary.n, 4);
        assert_eq!(report.summary.failures, 1);
        let bad = &report.outcomes[3];
        assert_eq!(bad.task_id, "T/bad");
        assert_eq!(bad.outcome.as_ref().unwrap_err(), "no signature");
        assert_eq!(report.success_records().len(), 3);
    }

    #[test]
    fn run_batch_is_concurrency_invariant() {
        let backend = toy();
        let records = batch_records();
        let cfg = CompressionConfig::default();
        let serial = run_batch(
            &records,
            DatasetFormat::Humaneval,
            &backend,
            &cfg,
            &BatchOptions::default(),
        )
        .unwrap();
        let threaded = run_batch(
            &records,
            DatasetFormat::Humaneval,
            &backend,
            &cfg,
            &BatchOptions {
                concurrency: 4,
                ..BatchOptions::default()
            },
        )
        .unwrap();
        let json = |report: &BatchReport| {
            report
                .success_records()
                .iter()
                .map(ResultRecord::to_json_line)
                .collect::<Vec<_>>()
        };
        assert_eq!(json(&serial), json(&threaded));
        assert_eq!(serial.summary, threaded.summary);
    }

    #[test]
    fn run_batch_seeds_random_per_record_deterministically() {
        let backend = toy();
        let records = batch_records();
        let opts = BatchOptions {
            method: Method::Random,
            match_ratio: 0.5,
            seed: 9,
            ..BatchOptions::default()
        };
        let cfg = CompressionConfig::default();
        let a = run_batch(&records, DatasetFormat::Humaneval, &backend, &cfg, &opts).unwrap();
        let b = run_batch(&records, DatasetFormat::Humaneval, &backend, &cfg, &opts).unwrap();
        assert_eq!(a.success_records(), b.success_records());
        for outcome in &a.outcomes {
            let result = outcome.outcome.as_ref().unwrap();
            // floor(0.5 · L) positions removed from the preprocessed form.
            let pre = backend.tokenize(&result.preprocessed_docstring).unwrap();
            assert_eq!(result.compressed_tokens, pre.len() - pre.len() / 2);
        }
    }

    #[test]
    fn run_batch_strips_description_instructions_by_default() {
        let backend = toy();
        let records = vec![DatasetRecord {
            task_id: "M/1".into(),
            raw: "Write a python function to sum the values in the list".into(),
            header: Some("def my_sum(xs):".into()),
        }];
        let report = run_batch(
            &records,
            DatasetFormat::Mbpp,
            &backend,
            &CompressionConfig::default(),
            &BatchOptions::default(),
        )
        .unwrap();
        let result = report.outcomes[0].outcome.as_ref().unwrap();
        assert!(
            !result.preprocessed_docstring.to_lowercase().contains("write a python"),
            "instruction prefix stripped: {:?}",
            result.preprocessed_docstring
        );
    }

    struct DeadBackend;

    impl ScoringBackend for DeadBackend {
        fn tokenize(&self, _text: &str) -> Result<crate::types::TokenSeq> {
            Err(Error::backend("/v1/tokenize", "connection refused"))
        }
        fn token_logprobs(&self, _tokens: &crate::types::TokenSeq) -> Result<Vec<f64>> {
            Err(Error::backend("/v1/logprobs", "connection refused"))
        }
        fn next_token_logits(&self, _prefix: &crate::types::TokenSeq) -> Result<Vec<f64>> {
            Err(Error::backend("/v1/logits", "connection refused"))
        }
        fn doc_embedding(&self, _tokens: &crate::types::TokenSeq) -> Result<Vec<f64>> {
            Err(Error::backend("/v1/embed", "connection refused"))
        }
    }

    #[test]
    fn run_batch_probe_fails_fast_on_dead_backend() {
        let err = run_batch(
            &batch_records(),
            DatasetFormat::Humaneval,
            &DeadBackend,
            &CompressionConfig::default(),
            &BatchOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Backend { .. }));
    }

    #[test]
    fn results_files_round_trip_and_append() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("results.jsonl");
        let first = vec![record_with("a", 0.25, 8, 6)];
        write_results(&path, &first, false).unwrap();
        let second = vec![record_with("b", 0.5, 8, 4)];
        write_results(&path, &second, true).unwrap();
        let read = read_results(&path).unwrap();
        assert_eq!(read.len(), 2);
        assert_eq!(read[0].task_id, "a");
        assert_eq!(read[1].task_id, "b");
        assert_eq!(read[1].result.ratio, 0.5);

        std::fs::write(&path, "not json\n").unwrap();
        assert!(matches!(
            read_results(&path),
            Err(Error::MalformedLine { line: 1, .. })
        ));
    }

    #[test]
    fn summary_file_is_valid_json() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("summary.json");
        let summary = summarize(Method::SelfInfo, "demo", 0, &[], 1_000).unwrap();
        write_summary(&path, &summary).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let parsed: BatchSummary = serde_json::from_str(&text).unwrap();
        assert_eq!(parsed, summary);
        assert_eq!(parsed.method, Method::SelfInfo);
    }
}
