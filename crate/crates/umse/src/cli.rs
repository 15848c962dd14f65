//! Argument parsing and the seven commands. Every error is reported as one
//! JSON line on standard error and a nonzero exit code.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use umse_core::corpus::{build_vocab, gen_synthetic_corpus, Provenance};
use umse_core::datagen::{generate_dataset, DatasetKind};
use umse_core::metaeval::{correlation_report, Aggregation, Dimension, ScoredSummary};
use umse_core::model::{FusionMethod, ModelConfig, SrPrefixOrder};
use umse_core::retrieval::build_index;
use umse_core::training::{grad_check, Mixing};
use umse_core::Scenario;

use crate::config::{ModeName, RunConfig};
use crate::formats::{read_checkpoint, read_index, read_vocab, write_checkpoint, write_index, write_vocab};
use crate::jsonl::{self, ScoreInput};
use crate::pipeline::{self, LexicalMetric, NumberedInput};
use crate::{Error, Result};

pub const VOCAB_FILE: &str = "vocab.txt";
pub const INDEX_FILE: &str = "index.bin";
pub const SUMMARY_MATCHING_FILE: &str = "summary_matching.jsonl";
pub const DOCUMENT_MATCHING_FILE: &str = "document_matching.jsonl";
pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const REPORT_FILE: &str = "report.json";

/// Training, scoring and meta-evaluation for unified multi-scenario
/// summarization evaluation.
#[derive(Debug, Parser)]
#[command(name = "umse", version, propagate_version = true)]
pub struct Cli {
    /// Flat JSON run configuration; command-line flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the vocabulary and BM25 index for a corpus.
    Build(BuildArgs),
    /// Generate the summary-matching and document-matching datasets.
    Gendata(GendataArgs),
    /// Write a synthetic topic-templated corpus.
    Synth(SynthArgs),
    /// Train a scorer and write a checkpoint and JSON report.
    Train(TrainArgs),
    /// Score candidate summaries with a checkpoint or a ROUGE baseline.
    Score(ScoreArgs),
    /// Correlate scores with human annotations.
    Evaluate(EvaluateArgs),
    /// Compare analytic gradients with central finite differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    /// Corpus JSONL with `id`, `text` and `summary` fields.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Directory receiving vocab.txt and index.bin.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Minimum token count for the vocabulary.
    #[arg(long)]
    pub min_frequency: Option<u32>,
}

#[derive(Debug, Args)]
pub struct GendataArgs {
    /// Corpus JSONL the index was built from.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Index file written by `build`.
    #[arg(long)]
    pub index: Option<PathBuf>,
    /// Pairs per dataset; each file gets twice this many lines.
    #[arg(long)]
    pub n_pairs: Option<usize>,
    /// Random seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Directory receiving summary_matching.jsonl and document_matching.jsonl.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Number of documents.
    #[arg(long)]
    pub n_docs: Option<usize>,
    /// Number of topics.
    #[arg(long)]
    pub topics: Option<usize>,
    /// Random seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output corpus JSONL.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Corpus JSONL the datasets were generated from.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Vocabulary file written by `build`.
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// Summary-matching dataset.
    #[arg(long)]
    pub summary_matching: Option<PathBuf>,
    /// Document-matching dataset.
    #[arg(long)]
    pub document_matching: Option<PathBuf>,
    /// Directory receiving model.ckpt and report.json.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Training mode.
    #[arg(long, value_enum)]
    pub mode: Option<ModeName>,
    /// Scenario trained by `--mode single` (SR, SD or SDR).
    #[arg(long)]
    pub scenario: Option<Scenario>,
    /// Stream interleaving: round_robin or proportional.
    #[arg(long)]
    pub mixing: Option<Mixing>,
    /// AdamW learning rate.
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Maximum number of epochs.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Examples per optimizer step.
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Seed for shuffling, dropout and mixing.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Global gradient-norm clip; 0 disables clipping.
    #[arg(long)]
    pub clip_norm: Option<f64>,
    /// Stop once every trained stream reaches this held-out accuracy.
    #[arg(long)]
    pub target_accuracy: Option<f64>,
    /// Wall-clock seconds after which no new epoch starts.
    #[arg(long)]
    pub time_budget_seconds: Option<f64>,
    /// Fraction of source documents held out for accuracy.
    #[arg(long)]
    pub heldout_fraction: Option<f64>,
    /// AdamW decoupled weight decay.
    #[arg(long)]
    pub weight_decay: Option<f64>,
    /// Hidden size.
    #[arg(long)]
    pub hidden_dim: Option<usize>,
    /// Transformer layers.
    #[arg(long)]
    pub n_layers: Option<usize>,
    /// Attention heads.
    #[arg(long)]
    pub n_heads: Option<usize>,
    /// Feed-forward inner size.
    #[arg(long)]
    pub ffn_dim: Option<usize>,
    /// Shared prefix rows.
    #[arg(long)]
    pub prefix_len: Option<usize>,
    /// Maximum packed input length.
    #[arg(long)]
    pub max_len: Option<usize>,
    /// Dropout rate during training.
    #[arg(long)]
    pub dropout: Option<f64>,
    /// Parameter initialization seed.
    #[arg(long)]
    pub init_seed: Option<u64>,
    /// Sum-Ref prefix order: reversed or even_then_odd.
    #[arg(long, value_parser = parse_sr_order)]
    pub sr_prefix_order: Option<SrPrefixOrder>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Input JSONL with `candidate` and, per scenario, `reference` and `document`.
    #[arg(long)]
    pub input: PathBuf,
    /// Output JSONL; standard output when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Checkpoint written by `train`; not needed with `--metric`.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Vocabulary file the checkpoint was trained with.
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// Scenario: SR, SD or SDR.
    #[arg(long, default_value = "SR")]
    pub scenario: Scenario,
    /// With `--scenario SDR`, fuse separate SR and SD scores: min, max,
    /// geometric_mean or arithmetic_mean.
    #[arg(long)]
    pub fusion: Option<FusionMethod>,
    /// Score with a lexical baseline against `reference` instead of a model.
    #[arg(long, value_enum, conflicts_with_all = ["checkpoint", "fusion"])]
    pub metric: Option<LexicalMetric>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Score JSONL with `doc_id`, `system_id` and `score`.
    #[arg(long)]
    pub scores: PathBuf,
    /// Annotation JSONL with a scale header line.
    #[arg(long)]
    pub annotations: PathBuf,
    /// Dimensions to report (repeatable); all four by default.
    #[arg(long = "dimension")]
    pub dimensions: Vec<Dimension>,
    /// Average scores and ratings per system before correlating.
    #[arg(long)]
    pub system_level: bool,
    /// Baseline score file for paired t-tests, as PATH or NAME=PATH (repeatable).
    #[arg(long = "baseline", value_name = "[NAME=]PATH")]
    pub baselines: Vec<String>,
    /// Output JSON report; standard output when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Parameter coordinates sampled.
    #[arg(long, default_value_t = 200)]
    pub coords: usize,
    /// Seed for the probe batch and coordinate choice.
    #[arg(long, default_value_t = 12)]
    pub seed: u64,
    /// Maximum accepted relative error.
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
}

fn parse_sr_order(s: &str) -> std::result::Result<SrPrefixOrder, String> {
    serde_json::from_value(json!(s)).map_err(|_| format!("unknown order {s:?}; expected reversed or even_then_odd"))
}

macro_rules! apply {
    ($cfg:ident, $args:ident, $($f:ident),*) => {
        $(if let Some(v) = $args.$f.clone() { $cfg.$f = v.into(); })*
    };
}

fn write_stdout_or(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Error::io(p, e)),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| Error::io(Path::new("<stdout>"), e))
        }
    }
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn out_dir(cfg: &RunConfig) -> PathBuf {
    cfg.out_dir.clone().unwrap_or_else(|| PathBuf::from("."))
}

fn cmd_build(mut cfg: RunConfig, a: BuildArgs, out: &mut dyn Write) -> Result<()> {
    apply!(cfg, a, corpus, out_dir);
    apply!(cfg, a, min_frequency);
    let corpus_path = cfg.require(&cfg.corpus, "corpus")?;
    let corpus = jsonl::read_corpus(corpus_path, Provenance::Real)?;
    let vocab = build_vocab(&corpus, cfg.min_frequency)?;
    let index = build_index(&corpus, &vocab)?;
    let dir = out_dir(&cfg);
    create_dir(&dir)?;
    write_vocab(&dir.join(VOCAB_FILE), &vocab)?;
    write_index(&dir.join(INDEX_FILE), &index)?;
    let stdout = Path::new("<stdout>");
    writeln!(out, "documents: {}", corpus.len()).map_err(|e| Error::io(stdout, e))?;
    writeln!(out, "vocabulary: {}", vocab.len()).map_err(|e| Error::io(stdout, e))
}

fn cmd_gendata(mut cfg: RunConfig, a: GendataArgs, out: &mut dyn Write) -> Result<()> {
    apply!(cfg, a, corpus, index, out_dir);
    apply!(cfg, a, n_pairs, seed);
    let corpus = jsonl::read_corpus(cfg.require(&cfg.corpus, "corpus")?, Provenance::Real)?;
    let index_path = cfg.require(&cfg.index, "index")?;
    let index = read_index(index_path)?;
    if index.n_docs() != corpus.len() {
        return Err(Error::format(
            index_path,
            format!("index has {} documents, corpus has {}", index.n_docs(), corpus.len()),
        ));
    }
    let dir = out_dir(&cfg);
    create_dir(&dir)?;
    for (kind, file) in [
        (DatasetKind::SummaryMatching, SUMMARY_MATCHING_FILE),
        (DatasetKind::DocumentMatching, DOCUMENT_MATCHING_FILE),
    ] {
        let data = generate_dataset(&corpus, &index, kind, cfg.n_pairs, cfg.seed)?;
        jsonl::write_dataset(&dir.join(file), &data)?;
        writeln!(out, "{}: {}", kind.as_str(), data.len()).map_err(|e| Error::io(Path::new("<stdout>"), e))?;
    }
    Ok(())
}

fn cmd_synth(mut cfg: RunConfig, a: SynthArgs, out: &mut dyn Write) -> Result<()> {
    if let Some(n) = a.n_docs {
        cfg.synth_docs = n;
    }
    if let Some(t) = a.topics {
        cfg.synth_topics = t;
    }
    apply!(cfg, a, seed);
    let corpus = gen_synthetic_corpus(cfg.synth_docs, cfg.synth_topics, cfg.seed)?;
    jsonl::write_corpus(&a.out, &corpus)?;
    writeln!(out, "documents: {}", corpus.len()).map_err(|e| Error::io(Path::new("<stdout>"), e))
}

/// Command-line overrides applied on top of the config file.
pub fn train_config(mut cfg: RunConfig, a: &TrainArgs) -> RunConfig {
    apply!(cfg, a, corpus, vocab, summary_matching, document_matching, out_dir);
    apply!(cfg, a, mode, scenario, target_accuracy, time_budget_seconds);
    apply!(cfg, a, mixing, learning_rate, epochs, batch_size, seed, heldout_fraction, weight_decay);
    apply!(cfg, a, hidden_dim, n_layers, n_heads, ffn_dim, prefix_len, max_len, dropout, init_seed, sr_prefix_order);
    if let Some(c) = a.clip_norm {
        cfg.clip_norm = (c > 0.0).then_some(c);
    }
    cfg
}

fn cmd_train(cfg: RunConfig, a: TrainArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = train_config(cfg, &a);
    cfg.train_config()?;
    let corpus = jsonl::read_corpus(cfg.require(&cfg.corpus, "corpus")?, Provenance::Real)?;
    let vocab = read_vocab(cfg.require(&cfg.vocab, "vocab")?)?;
    let sm = jsonl::read_dataset(cfg.require(&cfg.summary_matching, "summary_matching")?, &corpus)?;
    let dm = jsonl::read_dataset(cfg.require(&cfg.document_matching, "document_matching")?, &corpus)?;
    let (train_sets, heldout_sets) = pipeline::scenario_streams(&corpus, &vocab, sm, dm, cfg.heldout_fraction)?;
    let dir = out_dir(&cfg);
    create_dir(&dir)?;
    let report_path = dir.join(REPORT_FILE);
    let mut log = |p: pipeline::Progress<'_>| {
        let acc: serde_json::Map<String, serde_json::Value> = Scenario::ALL
            .iter()
            .map(|s| (s.as_str().to_string(), json!(p.stats.heldout_accuracy[s.index()])))
            .collect();
        eprintln!(
            "{}",
            json!({
                "event": "epoch",
                "epoch": p.stats.epoch,
                "mean_loss": p.stats.mean_loss,
                "steps": p.stats.steps,
                "heldout_accuracy": acc,
                "elapsed_seconds": p.elapsed_seconds,
            })
        );
    };
    let write_report = |r: &pipeline::TrainReport| -> Result<()> {
        let text = serde_json::to_string_pretty(r).expect("report serializes") + "\n";
        fs::write(&report_path, text).map_err(|e| Error::io(&report_path, e))
    };
    match pipeline::run_training(&cfg, &vocab, &train_sets, &heldout_sets, &mut log) {
        Ok((params, mut report)) => {
            let ckpt = dir.join(CHECKPOINT_FILE);
            write_checkpoint(&ckpt, &params)?;
            report.checkpoint = Some(ckpt);
            write_report(&report)?;
            writeln!(out, "{}", report_path.display()).map_err(|e| Error::io(Path::new("<stdout>"), e))
        }
        Err((e, report)) => {
            if let Some(r) = report {
                write_report(&r)?;
            }
            Err(e)
        }
    }
}

fn read_score_inputs(path: &Path) -> Result<Vec<NumberedInput>> {
    let mut v = Vec::new();
    jsonl::for_each_line(path, |line, input: ScoreInput| {
        v.push(NumberedInput { line, input });
        Ok(())
    })?;
    Ok(v)
}

fn cmd_score(cfg: RunConfig, a: ScoreArgs) -> Result<()> {
    let inputs = read_score_inputs(&a.input)?;
    let lines = match a.metric {
        Some(m) => pipeline::score_with_metric(&a.input, &inputs, m)?,
        None => {
            let ckpt = a.checkpoint.as_deref().ok_or_else(|| {
                Error::Config("missing required path checkpoint (flag --checkpoint), or pass --metric".into())
            })?;
            let vocab_path = a.vocab.clone().or(cfg.vocab).ok_or_else(|| {
                Error::Config("missing required path vocab (flag --vocab)".into())
            })?;
            let params = read_checkpoint(ckpt)?;
            let vocab = read_vocab(&vocab_path)?;
            if vocab.len() != params.config.vocab_size {
                return Err(Error::format(
                    &vocab_path,
                    format!("vocabulary has {} ids, checkpoint expects {}", vocab.len(), params.config.vocab_size),
                ));
            }
            pipeline::score_with_model(&a.input, &params, &vocab, &inputs, a.scenario, a.fusion.or(cfg.fusion))?
        }
    };
    let mut buf = Vec::new();
    jsonl::write_lines_to(&mut buf, &lines).expect("in-memory write");
    write_stdout_or(a.output.as_deref(), std::str::from_utf8(&buf).expect("utf-8 json"))
}

fn parse_baseline(spec: &str) -> (String, PathBuf) {
    match spec.split_once('=') {
        Some((name, path)) if !name.is_empty() => (name.to_string(), PathBuf::from(path)),
        _ => (String::new(), PathBuf::from(spec)),
    }
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<()> {
    let (scores, _) = jsonl::read_scores(&a.scores)?;
    let (_, annotations) = jsonl::read_annotations(&a.annotations)?;
    let mut baselines: Vec<(String, Vec<ScoredSummary>)> = Vec::new();
    for spec in &a.baselines {
        let (name, path) = parse_baseline(spec);
        let (b, metric) = jsonl::read_scores(&path)?;
        let name = if !name.is_empty() {
            name
        } else if let Some(m) = metric {
            m
        } else {
            path.file_stem().map_or_else(|| spec.clone(), |s| s.to_string_lossy().into_owned())
        };
        baselines.push((name, b));
    }
    let dims = if a.dimensions.is_empty() {
        Dimension::ALL.to_vec()
    } else {
        a.dimensions.clone()
    };
    let aggregation = if a.system_level {
        Aggregation::SystemLevel
    } else {
        Aggregation::SummaryLevel
    };
    let refs: Vec<(&str, &[ScoredSummary])> = baselines.iter().map(|(n, s)| (n.as_str(), s.as_slice())).collect();
    let report = correlation_report(&scores, &annotations, &dims, aggregation, &refs)?;
    let text = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    write_stdout_or(a.output.as_deref(), &text)
}

fn cmd_gradcheck(a: GradcheckArgs, out: &mut dyn Write) -> Result<()> {
    let config = ModelConfig::tiny(umse_core::corpus::NUM_SPECIAL as usize + 20);
    let start = std::time::Instant::now();
    let err = grad_check(&config, a.coords, a.seed)?;
    let passed = err < a.tolerance;
    let line = json!({
        "max_relative_error": err,
        "coords": a.coords,
        "tolerance": a.tolerance,
        "passed": passed,
        "seconds": start.elapsed().as_secs_f64(),
    });
    writeln!(out, "{line}").map_err(|e| Error::io(Path::new("<stdout>"), e))?;
    if passed {
        Ok(())
    } else {
        Err(Error::Config(format!("max relative error {err:e} exceeds {:e}", a.tolerance)))
    }
}

/// Runs a parsed command line.
pub fn run(cli: Cli) -> Result<()> {
    let cfg = RunConfig::load(cli.config.as_deref())?;
    let mut stdout = std::io::stdout().lock();
    match cli.command {
        Command::Build(a) => cmd_build(cfg, a, &mut stdout),
        Command::Gendata(a) => cmd_gendata(cfg, a, &mut stdout),
        Command::Synth(a) => cmd_synth(cfg, a, &mut stdout),
        Command::Train(a) => cmd_train(cfg, a, &mut stdout),
        Command::Score(a) => {
            drop(stdout);
            cmd_score(cfg, a)
        }
        Command::Evaluate(a) => {
            drop(stdout);
            cmd_evaluate(a)
        }
        Command::Gradcheck(a) => cmd_gradcheck(a, &mut stdout),
    }
}

/// The machine-readable form of an error.
pub fn error_json(e: &Error) -> serde_json::Value {
    let kind = match e {
        Error::Io { .. } => "io",
        Error::Parse { .. } => "parse",
        Error::Format { .. } => "format",
        Error::Config(_) => "config",
        Error::Core(_) => "core",
    };
    let mut v = json!({ "error": kind, "message": e.to_string() });
    match e {
        Error::Io { path, .. } | Error::Format { path, .. } => v["path"] = json!(path),
        Error::Parse { path, line, .. } => {
            v["path"] = json!(path);
            v["line"] = json!(line);
        }
        _ => {}
    }
    v
}

/// Parses `args`, runs the command and returns the process exit code:
/// 0 on success, 1 for runtime errors, 2 for usage errors.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let msg = e.render().to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("{}", json!({ "error": "usage", "message": first }));
            return 2;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", error_json(&e));
            1
        }
    }
}
