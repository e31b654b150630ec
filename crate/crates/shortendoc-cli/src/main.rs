//! Command-line front end: compress one docstring, run a dataset batch, or
//! summarize an existing results file.
//!
//! Exit codes: 0 success, 1 usage or data errors, 2 backend failures,
//! 3 prompts that cannot be split into signature and docstring.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use shortendoc::backend::{BigramToy, ConstantToy, PrefixToy, RemoteBackend, UniformToy};
use shortendoc::backend::ScoringBackend;
use shortendoc::evalkit::{
    self, load_dataset, read_results, run_batch, summarize, write_results, write_summary,
    BatchOptions, DatasetFormat,
};
use shortendoc::types::{ConstraintReference, ScanStrategy};
use shortendoc::{
    shortendoc_compress, split_prompt, CompressionConfig, Error, Method, Prompt, Result,
    ResultRecord,
};

#[derive(Parser)]
#[command(
    name = "shortendoc",
    version,
    about = "Shorten docstrings in code-generation prompts without changing what the model would do"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compress a single docstring and print the outcome.
    Compress(CompressArgs),
    /// Compress every record of a JSONL dataset and write results + summary.
    Batch(BatchArgs),
    /// Summarize an existing results file.
    Report(ReportArgs),
}

#[derive(Args)]
struct TuningArgs {
    /// Similarity floor a removal must clear.
    #[arg(long, default_value_t = 0.999)]
    tau: f64,
    /// Least-important positions seeding each round's candidate windows.
    #[arg(long, default_value_t = 10)]
    top_n: usize,
    /// Disable gated stop-word removal during preprocessing.
    #[arg(long)]
    no_stop_words: bool,
    /// Instruction prefix to strip once, case-insensitively (repeatable).
    #[arg(long = "strip-instruction")]
    strip_instruction: Vec<String>,
    /// Cap on accepted removal steps.
    #[arg(long)]
    max_steps: Option<usize>,
    /// Condition importance scores on the signature.
    #[arg(long)]
    condition_on_signature: bool,
    /// Candidate acceptance: accept-first or best-of-round.
    #[arg(long, default_value = "accept-first")]
    strategy: String,
    /// Similarity reference: preprocessed or current-working.
    #[arg(long, default_value = "preprocessed")]
    reference: String,
}

impl TuningArgs {
    fn to_config(&self) -> Result<CompressionConfig> {
        let mut cfg = CompressionConfig {
            tau: self.tau,
            top_n: self.top_n,
            max_steps: self.max_steps,
            condition_on_signature: self.condition_on_signature,
            ..CompressionConfig::default()
        };
        if self.no_stop_words {
            cfg.stop_words.clear();
        }
        if !self.strip_instruction.is_empty() {
            cfg.strip_instructions = self.strip_instruction.clone();
        }
        cfg.strategy = match self.strategy.as_str() {
            "accept-first" => ScanStrategy::AcceptFirst,
            "best-of-round" => ScanStrategy::BestOfRound,
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown strategy {other:?} (expected accept-first or best-of-round)"
                )))
            }
        };
        cfg.reference = match self.reference.as_str() {
            "preprocessed" => ConstraintReference::Preprocessed,
            "current-working" => ConstraintReference::CurrentWorking,
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown reference {other:?} (expected preprocessed or current-working)"
                )))
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct CompressArgs {
    /// Scoring backend: http(s)://HOST:PORT, toy:uniform:V, toy:bigram:PATH,
    /// toy:constant, or toy:prefix. Falls back to SHORTENDOC_BACKEND_URL.
    #[arg(long)]
    backend: Option<String>,
    /// Function header used as conditioning context.
    #[arg(long, requires = "docstring")]
    signature: Option<String>,
    /// Docstring text to compress.
    #[arg(long, requires = "signature")]
    docstring: Option<String>,
    /// File holding a raw prompt to split instead of --signature/--docstring.
    #[arg(long, conflicts_with_all = ["signature", "docstring"])]
    prompt_file: Option<PathBuf>,
    /// Convention used to split --prompt-file: humaneval or mbpp.
    #[arg(long, default_value = "humaneval")]
    format: String,
    /// Task id echoed into the output.
    #[arg(long, default_value = "adhoc")]
    task_id: String,
    /// Emit the full result as one JSON line instead of a readable summary.
    #[arg(long)]
    json: bool,
    #[command(flatten)]
    tuning: TuningArgs,
}

#[derive(Args)]
struct BatchArgs {
    /// Scoring backend URI (see `compress --help`); falls back to
    /// SHORTENDOC_BACKEND_URL.
    #[arg(long)]
    backend: Option<String>,
    /// JSONL dataset to compress.
    #[arg(long)]
    dataset: PathBuf,
    /// Dataset shape: humaneval or mbpp.
    #[arg(long, default_value = "humaneval")]
    format: String,
    /// Results JSONL path; the summary lands next to it as
    /// `<out>.summary.json`.
    #[arg(long)]
    out: PathBuf,
    /// Compression method: shortendoc, random, or selfinfo.
    #[arg(long, default_value = "shortendoc")]
    method: String,
    /// Removal ratio for the random/selfinfo baselines.
    #[arg(long, default_value_t = 0.3)]
    match_ratio: f64,
    /// Base seed for the random baseline.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads.
    #[arg(long, default_value_t = 4)]
    concurrency: usize,
    /// Model size for FLOPs estimates; accepts scientific notation.
    #[arg(long, value_parser = parse_model_params, default_value = "1300000000")]
    model_params: u64,
    /// Skip task ids already present in --out, append new results, and
    /// rewrite the summary over the whole file.
    #[arg(long)]
    resume: bool,
    /// Dataset label for the summary; defaults to the dataset file stem.
    #[arg(long)]
    dataset_name: Option<String>,
    #[command(flatten)]
    tuning: TuningArgs,
}

#[derive(Args)]
struct ReportArgs {
    /// Results JSONL written by `batch`.
    #[arg(long)]
    results: PathBuf,
    /// Add FLOPs estimates for this model size; accepts scientific notation.
    #[arg(long, value_parser = parse_model_params)]
    model_params: Option<u64>,
}

fn parse_model_params(s: &str) -> std::result::Result<u64, String> {
    let value: f64 = s
        .parse()
        .map_err(|_| format!("{s:?} is not a number"))?;
    if !value.is_finite() || value < 1.0 {
        return Err("model parameter count must be a positive number".into());
    }
    Ok(value.round() as u64)
}

fn backend_uri(flag: Option<String>) -> Result<String> {
    flag.or_else(|| {
        std::env::var("SHORTENDOC_BACKEND_URL")
            .ok()
            .filter(|s| !s.trim().is_empty())
    })
    .ok_or_else(|| {
        Error::InvalidConfig("no backend: pass --backend or set SHORTENDOC_BACKEND_URL".into())
    })
}

fn make_backend(uri: &str) -> Result<Box<dyn ScoringBackend>> {
    if uri.starts_with("http://") || uri.starts_with("https://") {
        return Ok(Box::new(RemoteBackend::new(uri)?));
    }
    match uri.split(':').collect::<Vec<_>>().as_slice() {
        ["toy", "constant"] => Ok(Box::new(ConstantToy::new())),
        ["toy", "prefix"] => Ok(Box::new(PrefixToy::new())),
        ["toy", "uniform", size] => {
            let size: u32 = size.parse().map_err(|_| {
                Error::InvalidConfig(format!("toy:uniform needs a vocab size, got {size:?}"))
            })?;
            Ok(Box::new(UniformToy::new(size)?))
        }
        ["toy", "bigram", path @ ..] if !path.is_empty() => {
            // Re-join so Windows-style paths with colons survive.
            Ok(Box::new(BigramToy::load_file(path.join(":"))?))
        }
        _ => Err(Error::InvalidConfig(format!(
            "unknown backend uri {uri:?} (expected http(s)://…, toy:uniform:V, toy:bigram:PATH, toy:constant, or toy:prefix)"
        ))),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = i32::from(e.use_stderr());
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(err) = run(cli) {
        eprintln!("error: {err}");
        std::process::exit(exit_code(&err));
    }
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Backend { .. } => 2,
        Error::NoSignature | Error::MalformedDocstring => 3,
        Error::Stage { source, .. } | Error::StopWordGate { source, .. } => exit_code(source),
        _ => 1,
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Compress(args) => cmd_compress(args),
        Command::Batch(args) => cmd_batch(args),
        Command::Report(args) => cmd_report(args),
    }
}

fn cmd_compress(args: CompressArgs) -> Result<()> {
    let cfg = args.tuning.to_config()?;
    let backend = make_backend(&backend_uri(args.backend)?)?;
    let (signature, docstring) = match (&args.prompt_file, &args.signature, &args.docstring) {
        (Some(path), _, _) => {
            let raw = std::fs::read_to_string(path).map_err(|source| Error::Io {
                path: path.display().to_string(),
                source,
            })?;
            split_prompt(&raw, args.format.parse()?)?
        }
        (None, Some(signature), Some(docstring)) => (signature.clone(), docstring.clone()),
        _ => {
            return Err(Error::InvalidConfig(
                "pass --signature with --docstring, or --prompt-file".into(),
            ))
        }
    };
    let prompt = Prompt::new(&args.task_id, signature, docstring)?;
    let result = shortendoc_compress(&prompt, backend.as_ref(), &cfg)?;
    let record = ResultRecord {
        task_id: args.task_id,
        result,
    };
    if args.json {
        println!("{}", record.to_json_line());
        return Ok(());
    }
    let r = &record.result;
    println!("task {}", record.task_id);
    println!("original {} tokens: {}", r.original_tokens, r.original_docstring);
    println!("preprocessed: {}", r.preprocessed_docstring);
    println!(
        "compressed {} tokens: {}",
        r.compressed_tokens, r.compressed_docstring
    );
    match r.final_similarity {
        Some(similarity) => println!(
            "ratio {:.4}, steps {}, final similarity {:.6}",
            r.ratio,
            r.trace.len(),
            similarity
        ),
        None => println!("ratio {:.4}, steps {}", r.ratio, r.trace.len()),
    }
    if let Some(reason) = &r.skipped_reason {
        println!("skipped: {reason}");
    }
    Ok(())
}

fn cmd_batch(args: BatchArgs) -> Result<()> {
    let cfg = args.tuning.to_config()?;
    let method: Method = args.method.parse()?;
    let format: DatasetFormat = args.format.parse()?;
    let backend = make_backend(&backend_uri(args.backend)?)?;
    let records = load_dataset(&args.dataset, format)?;
    let dataset_name = args.dataset_name.unwrap_or_else(|| {
        args.dataset
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".into())
    });
    let opts = BatchOptions {
        method,
        match_ratio: args.match_ratio,
        seed: args.seed,
        concurrency: args.concurrency,
        model_params: args.model_params,
        dataset_name,
    };

    let resuming = args.resume && args.out.exists();
    let done: HashSet<String> = if resuming {
        read_results(&args.out)?
            .into_iter()
            .map(|r| r.task_id)
            .collect()
    } else {
        HashSet::new()
    };
    let pending: Vec<_> = records
        .iter()
        .filter(|r| !done.contains(&r.task_id))
        .cloned()
        .collect();
    if resuming {
        println!("resume: {} done, {} to run", done.len(), pending.len());
    }

    let report = run_batch(&pending, format, backend.as_ref(), &cfg, &opts)?;
    write_results(&args.out, &report.success_records(), resuming)?;

    // The summary always covers the whole results file, not just this run.
    let all_results = read_results(&args.out)?;
    let summary = summarize(
        method,
        &opts.dataset_name,
        records.len(),
        &all_results,
        opts.model_params,
    )?;
    let summary_path = summary_path_for(&args.out);
    write_summary(&summary_path, &summary)?;

    println!(
        "processed {} records ({} failures)",
        records.len(),
        summary.failures
    );
    println!(
        "mean ratio {:.4}, median {:.4}",
        summary.mean_ratio, summary.median_ratio
    );
    println!("results: {}", args.out.display());
    println!("summary: {}", summary_path.display());
    Ok(())
}

fn summary_path_for(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_os_string();
    name.push(".summary.json");
    PathBuf::from(name)
}

fn cmd_report(args: ReportArgs) -> Result<()> {
    let results = read_results(&args.results)?;
    println!("{} records", results.len());
    println!("mean ratio {:.4}", evalkit::mean_ratio(&results));
    println!("median ratio {:.4}", evalkit::median_ratio(&results));
    if let Some(model_params) = args.model_params {
        let (raw, compressed) = evalkit::flops_for_results(&results, model_params)?;
        println!("flops raw {raw:.3e}");
        println!("flops compressed {compressed:.3e}");
    }
    Ok(())
}
