//! The pipeline stages behind each command, usable without the CLI.

use std::collections::BTreeMap;
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use umse_core::corpus::{normalize_tokens, tokenize, Corpus, Vocabulary};
use umse_core::datagen::{
    by_scenario, split_heldout, to_scenario_examples, LabeledExample, ScenarioExample,
};
use umse_core::metaeval::{rouge_l, rouge_n};
use umse_core::model::{assemble_input, fuse, score_layouts, FusionMethod, Layout, ModelParameters};
use umse_core::training::{train, EpochStats, TrainSummary};
use umse_core::Scenario;

use crate::config::RunConfig;
use crate::jsonl::{ScoreInput, ScoreLine};
use crate::{Error, Result};

const SCORE_BATCH: usize = 32;

pub type Streams = [Vec<ScenarioExample>; 3];

/// Splits both datasets by source document and maps them onto the three
/// scenario streams: `(train, held-out)`.
pub fn scenario_streams(
    corpus: &Corpus,
    vocab: &Vocabulary,
    summary_matching: Vec<LabeledExample>,
    document_matching: Vec<LabeledExample>,
    heldout_fraction: f64,
) -> Result<(Streams, Streams)> {
    let (smt, smh) = split_heldout(summary_matching, heldout_fraction);
    let (dmt, dmh) = split_heldout(document_matching, heldout_fraction);
    let mut tr = to_scenario_examples(&smt, corpus, vocab)?;
    tr.extend(to_scenario_examples(&dmt, corpus, vocab)?);
    let mut he = to_scenario_examples(&smh, corpus, vocab)?;
    he.extend(to_scenario_examples(&dmh, corpus, vocab)?);
    Ok((by_scenario(tr), by_scenario(he)))
}

fn by_name(acc: &[Option<f64>; 3]) -> BTreeMap<String, Option<f64>> {
    Scenario::ALL
        .iter()
        .map(|s| (s.as_str().to_string(), acc[s.index()]))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    pub epoch: usize,
    pub mean_loss: f64,
    pub steps: usize,
    pub heldout_accuracy: BTreeMap<String, Option<f64>>,
    pub elapsed_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub mode: String,
    pub train_examples: BTreeMap<String, usize>,
    pub heldout_examples: BTreeMap<String, usize>,
    pub initial_batch_loss: Option<f64>,
    pub epochs: Vec<EpochReport>,
    pub best_epoch: Option<usize>,
    /// Held-out accuracy of the kept epoch.
    pub heldout_accuracy: BTreeMap<String, Option<f64>>,
    pub total_steps: usize,
    pub stopped_early: bool,
    pub wall_clock_seconds: f64,
    pub checkpoint: Option<PathBuf>,
    pub error: Option<String>,
}

impl TrainReport {
    fn new(summary: &TrainSummary, mode: String, train: &Streams, heldout: &Streams, times: &[f64], wall: f64) -> Self {
        let counts = |s: &Streams| {
            Scenario::ALL
                .iter()
                .map(|sc| (sc.as_str().to_string(), s[sc.index()].len()))
                .collect()
        };
        let epochs: Vec<EpochReport> = summary
            .epochs
            .iter()
            .zip(times)
            .map(|(e, &t)| EpochReport {
                epoch: e.epoch,
                mean_loss: e.mean_loss,
                steps: e.steps,
                heldout_accuracy: by_name(&e.heldout_accuracy),
                elapsed_seconds: t,
            })
            .collect();
        let best = summary
            .best_epoch
            .and_then(|b| summary.epochs.iter().find(|e| e.epoch == b))
            .map_or([None; 3], |e| e.heldout_accuracy);
        TrainReport {
            mode,
            train_examples: counts(train),
            heldout_examples: counts(heldout),
            initial_batch_loss: summary.initial_batch_loss,
            epochs,
            best_epoch: summary.best_epoch,
            heldout_accuracy: by_name(&best),
            total_steps: summary.total_steps,
            stopped_early: summary.stopped_early,
            wall_clock_seconds: wall,
            checkpoint: None,
            error: None,
        }
    }
}

/// Per-epoch progress passed to the caller as training runs.
pub struct Progress<'a> {
    pub stats: &'a EpochStats,
    pub elapsed_seconds: f64,
}

/// Trains a freshly initialized model, stopping after the first epoch that
/// ends past `time_budget_seconds`. On failure the partial report is
/// returned together with the error.
pub fn run_training(
    run: &RunConfig,
    vocab: &Vocabulary,
    train_sets: &Streams,
    heldout_sets: &Streams,
    progress: &mut dyn FnMut(Progress<'_>),
) -> std::result::Result<(ModelParameters, TrainReport), (Error, Option<TrainReport>)> {
    let setup = || -> Result<_> {
        let cfg = run.train_config()?;
        let params = ModelParameters::init(run.model_config(vocab.len())?)?;
        Ok((cfg, params))
    };
    let (cfg, params) = setup().map_err(|e| (e, None))?;
    let mode = cfg.mode.to_string();
    let start = Instant::now();
    let mut times = Vec::new();
    let result = train(params, train_sets, heldout_sets, &cfg, &mut |s| {
        let t = start.elapsed().as_secs_f64();
        times.push(t);
        progress(Progress {
            stats: s,
            elapsed_seconds: t,
        });
        match run.time_budget_seconds {
            Some(b) if t >= b => ControlFlow::Break(()),
            _ => ControlFlow::Continue(()),
        }
    });
    let wall = start.elapsed().as_secs_f64();
    match result {
        Ok(out) => {
            let report = TrainReport::new(&out.summary, mode, train_sets, heldout_sets, &times, wall);
            Ok((out.params, report))
        }
        Err(f) => {
            let mut report = TrainReport::new(&f.summary, mode, train_sets, heldout_sets, &times, wall);
            report.error = Some(f.error.to_string());
            Err((f.error.into(), Some(report)))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum LexicalMetric {
    #[value(name = "rouge1")]
    Rouge1,
    #[value(name = "rouge2")]
    Rouge2,
    #[value(name = "rougeL")]
    RougeL,
}

impl LexicalMetric {
    pub fn as_str(self) -> &'static str {
        match self {
            LexicalMetric::Rouge1 => "rouge1",
            LexicalMetric::Rouge2 => "rouge2",
            LexicalMetric::RougeL => "rougeL",
        }
    }

    /// F1 of the candidate against `reference`, over normalized tokens.
    pub fn score(self, candidate: &str, reference: &str) -> f64 {
        let c = normalize_tokens(candidate);
        let r = normalize_tokens(reference);
        match self {
            LexicalMetric::Rouge1 => rouge_n(&c, &r, 1).f1,
            LexicalMetric::Rouge2 => rouge_n(&c, &r, 2).f1,
            LexicalMetric::RougeL => rouge_l(&c, &r).f1,
        }
    }
}

/// A score input with the line it came from, for error messages.
pub struct NumberedInput {
    pub line: usize,
    pub input: ScoreInput,
}

fn field<'a>(path: &Path, n: &'a NumberedInput, s: Scenario, name: &str) -> Result<&'a str> {
    let v = match name {
        "reference" => n.input.reference.as_deref(),
        _ => n.input.document.as_deref(),
    };
    v.ok_or_else(|| Error::parse(path, n.line, format!("scenario {s} needs field \"{name}\"")))
}

fn layouts_for(
    path: &Path,
    params: &ModelParameters,
    vocab: &Vocabulary,
    inputs: &[NumberedInput],
    scenario: Scenario,
) -> Result<Vec<Layout>> {
    inputs
        .iter()
        .map(|n| {
            let x = tokenize(&n.input.candidate, vocab);
            let y = scenario
                .needs_reference()
                .then(|| field(path, n, scenario, "reference").map(|t| tokenize(t, vocab)))
                .transpose()?;
            let d = scenario
                .needs_document()
                .then(|| field(path, n, scenario, "document").map(|t| tokenize(t, vocab)))
                .transpose()?;
            assemble_input(scenario, &x, y.as_deref(), d.as_deref(), &params.config)
                .map_err(|e| Error::parse(path, n.line, e.to_string()))
        })
        .collect()
}

fn model_scores(
    path: &Path,
    params: &ModelParameters,
    vocab: &Vocabulary,
    inputs: &[NumberedInput],
    scenario: Scenario,
) -> Result<Vec<f64>> {
    let layouts = layouts_for(path, params, vocab, inputs, scenario)?;
    let mut out = Vec::with_capacity(layouts.len());
    for chunk in layouts.chunks(SCORE_BATCH) {
        let refs: Vec<&Layout> = chunk.iter().collect();
        out.extend(score_layouts(params, &refs)?.iter().map(|o| o.score));
    }
    Ok(out)
}

/// Scores every input with the model. For Sum-Doc-Ref with `fusion`, the
/// Sum-Ref and Sum-Doc scores are computed separately and fused.
pub fn score_with_model(
    path: &Path,
    params: &ModelParameters,
    vocab: &Vocabulary,
    inputs: &[NumberedInput],
    scenario: Scenario,
    fusion: Option<FusionMethod>,
) -> Result<Vec<ScoreLine>> {
    let scores = match fusion {
        None => model_scores(path, params, vocab, inputs, scenario)?,
        Some(m) => {
            if scenario != Scenario::SumDocRef {
                return Err(Error::Config(format!("--fusion applies only to scenario SDR, not {scenario}")));
            }
            for n in inputs {
                field(path, n, scenario, "reference")?;
                field(path, n, scenario, "document")?;
            }
            let sr = model_scores(path, params, vocab, inputs, Scenario::SumRef)?;
            let sd = model_scores(path, params, vocab, inputs, Scenario::SumDoc)?;
            sr.iter()
                .zip(&sd)
                .map(|(&a, &b)| fuse(a, b, m))
                .collect::<umse_core::Result<Vec<f64>>>()?
        }
    };
    Ok(inputs
        .iter()
        .zip(scores)
        .map(|(n, score)| ScoreLine {
            score,
            scenario: scenario.as_str().to_string(),
            fusion: fusion.map(|m| m.as_str().to_string()),
            metric: None,
            doc_id: n.input.doc_id.clone(),
            system_id: n.input.system_id.clone(),
        })
        .collect())
}

/// Lexical baseline scores against each input's reference.
pub fn score_with_metric(path: &Path, inputs: &[NumberedInput], metric: LexicalMetric) -> Result<Vec<ScoreLine>> {
    inputs
        .iter()
        .map(|n| {
            let r = field(path, n, Scenario::SumRef, "reference")?;
            Ok(ScoreLine {
                score: metric.score(&n.input.candidate, r),
                scenario: Scenario::SumRef.as_str().to_string(),
                fusion: None,
                metric: Some(metric.as_str().to_string()),
                doc_id: n.input.doc_id.clone(),
                system_id: n.input.system_id.clone(),
            })
        })
        .collect()
}
