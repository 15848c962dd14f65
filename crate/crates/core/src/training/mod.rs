//! Cross-entropy fine-tuning of the scorer on scenario streams.

mod gradcheck;
mod optim;

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::ControlFlow;
use core::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use gradcheck::{grad_check, grad_check_linear_head, relative_error};
pub use optim::{clip_grad_norm, global_norm, update_rules, AdamW, AdamWConfig, UpdateRule};

use crate::datagen::ScenarioExample;
use crate::math;
use crate::model::{self, assemble_input, Layout, ModelConfig, ModelParameters};
use crate::{Error, Result, Scenario};

pub const LOSS_EPS: f64 = 1e-12;
const SHUFFLE_STREAM: u64 = 11;
const DROPOUT_STREAM: u64 = 12;
const MIXING_STREAM: u64 = 13;
const EVAL_BATCH: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum TrainMode {
    /// All three streams share one model and one permuted prefix.
    #[default]
    Unified,
    /// All three streams, no prefix slots at all.
    JointNoPrefix,
    SingleScenario(Scenario),
}

impl TrainMode {
    pub fn active(self) -> Vec<Scenario> {
        match self {
            TrainMode::Unified | TrainMode::JointNoPrefix => Scenario::ALL.to_vec(),
            TrainMode::SingleScenario(s) => vec![s],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TrainMode::Unified => "unified",
            TrainMode::JointNoPrefix => "joint_no_prefix",
            TrainMode::SingleScenario(_) => "single_scenario",
        }
    }
}

impl fmt::Display for TrainMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrainMode::SingleScenario(s) => write!(f, "single_scenario({s})"),
            m => f.write_str(m.name()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Mixing {
    /// One batch from each non-exhausted stream in turn.
    #[default]
    RoundRobin,
    /// Draw the next stream with probability proportional to its
    /// remaining batches.
    Proportional,
}

impl FromStr for Mixing {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "round_robin" => Ok(Mixing::RoundRobin),
            "proportional" => Ok(Mixing::Proportional),
            _ => Err(Error::InvalidArgument(alloc::format!("unknown mixing {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub optimizer: AdamWConfig,
    pub mode: TrainMode,
    pub mixing: Mixing,
    /// Global gradient-norm bound; `None` disables clipping.
    pub clip_norm: Option<f64>,
    /// Stop once every active held-out stream reaches this accuracy.
    pub target_accuracy: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 3e-5,
            epochs: 10,
            batch_size: 8,
            seed: 12,
            optimizer: AdamWConfig::default(),
            mode: TrainMode::Unified,
            mixing: Mixing::RoundRobin,
            clip_norm: Some(1.0),
            target_accuracy: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::InvalidConfig("learning_rate must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be at least 1".into()));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be at least 1".into()));
        }
        if matches!(self.clip_norm, Some(c) if !(c > 0.0)) {
            return Err(Error::InvalidConfig("clip_norm must be positive".into()));
        }
        Ok(())
    }
}

/// Summed binary cross-entropy over a batch of positive-class
/// probabilities.
pub fn cross_entropy_loss(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: scores.len(),
            right: labels.len(),
        });
    }
    Ok(scores
        .iter()
        .zip(labels)
        .map(|(&p, &c)| {
            let p = p.clamp(LOSS_EPS, 1.0 - LOSS_EPS);
            if c == 1 {
                -math::ln(p)
            } else {
                -math::ln(1.0 - p)
            }
        })
        .sum())
}

/// Gradient of the summed loss with respect to the two logits of each
/// example. Clamped probabilities get zero gradient, matching the flat
/// loss there.
fn dlogits(probs: &[f64], labels: &[u8]) -> Vec<f64> {
    let mut out = Vec::with_capacity(probs.len());
    for (p, &c) in probs.chunks(2).zip(labels) {
        let p1 = p[1];
        let g = if !(LOSS_EPS..=1.0 - LOSS_EPS).contains(&p1) {
            0.0
        } else {
            p1 - f64::from(c)
        };
        out.extend([-g, g]);
    }
    out
}

/// Loss and parameter gradient for a batch of assembled inputs.
pub fn loss_and_gradient(
    params: &ModelParameters,
    layouts: &[&Layout],
    labels: &[u8],
    dropout: Option<&mut ChaCha8Rng>,
) -> Result<(f64, Vec<f64>)> {
    if layouts.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    if layouts.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: layouts.len(),
            right: labels.len(),
        });
    }
    let pass = model::forward(params, layouts, dropout)?;
    let loss = cross_entropy_loss(&pass.scores(), labels)?;
    let mut grads = vec![0.0; params.values.len()];
    model::backward(params, &pass, &dlogits(&pass.head.probs, labels), &mut grads);
    if !loss.is_finite() || !grads.iter().all(|g| g.is_finite()) {
        return Err(Error::NumericalDivergence);
    }
    Ok((loss, grads))
}

pub fn assemble_example(ex: &ScenarioExample, config: &ModelConfig) -> Result<Layout> {
    assemble_input(
        ex.scenario,
        &ex.candidate,
        ex.reference.as_deref(),
        ex.document.as_deref(),
        config,
    )
}

/// Gradient for a batch of scenario examples, without dropout.
pub fn backward(params: &ModelParameters, batch: &[ScenarioExample]) -> Result<(f64, Vec<f64>)> {
    let layouts = batch
        .iter()
        .map(|ex| assemble_example(ex, &params.config))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&Layout> = layouts.iter().collect();
    let labels: Vec<u8> = batch.iter().map(|e| e.label).collect();
    loss_and_gradient(params, &refs, &labels, None)
}

/// Fraction of examples whose thresholded score (`p+ > 0.5`) matches the
/// label.
pub fn accuracy(params: &ModelParameters, layouts: &[Layout], labels: &[u8]) -> Result<f64> {
    if layouts.is_empty() {
        return Err(Error::InvalidArgument("no examples to evaluate".into()));
    }
    let mut correct = 0usize;
    for (chunk, labs) in layouts.chunks(EVAL_BATCH).zip(labels.chunks(EVAL_BATCH)) {
        let refs: Vec<&Layout> = chunk.iter().collect();
        for (out, &c) in model::score_layouts(params, &refs)?.iter().zip(labs) {
            if u8::from(out.score > 0.5) == c {
                correct += 1;
            }
        }
    }
    Ok(correct as f64 / layouts.len() as f64)
}

/// Statistics for one completed epoch.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EpochStats {
    /// 1-based.
    pub epoch: usize,
    /// Mean per-example loss over the epoch.
    pub mean_loss: f64,
    pub steps: usize,
    /// Held-out accuracy indexed by [`Scenario::index`]; `None` for
    /// inactive streams or streams without held-out data.
    pub heldout_accuracy: [Option<f64>; 3],
}

impl EpochStats {
    /// Mean held-out accuracy over the streams that have one.
    pub fn mean_accuracy(&self) -> Option<f64> {
        let xs: Vec<f64> = self.heldout_accuracy.iter().flatten().copied().collect();
        (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainSummary {
    pub epochs: Vec<EpochStats>,
    /// Per-example loss of the very first batch before any update.
    pub initial_batch_loss: Option<f64>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: Option<usize>,
    pub total_steps: usize,
    pub stopped_early: bool,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParameters,
    pub summary: TrainSummary,
}

/// A failed run together with whatever was recorded before the failure.
#[derive(Debug, Clone)]
pub struct TrainFailure {
    pub error: Error,
    pub summary: TrainSummary,
}

impl fmt::Display for TrainFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.error.fmt(f)
    }
}

impl From<Error> for TrainFailure {
    fn from(error: Error) -> Self {
        TrainFailure {
            error,
            summary: TrainSummary::default(),
        }
    }
}

struct Stream {
    layouts: Vec<Layout>,
    labels: Vec<u8>,
}

fn prepare(examples: &[ScenarioExample], scenario: Scenario, config: &ModelConfig) -> Result<Stream> {
    let mut layouts = Vec::with_capacity(examples.len());
    let mut labels = Vec::with_capacity(examples.len());
    for ex in examples {
        if ex.scenario != scenario {
            return Err(Error::InvalidArgument(alloc::format!(
                "{} example in the {scenario} stream",
                ex.scenario
            )));
        }
        layouts.push(assemble_example(ex, config)?);
        labels.push(ex.label);
    }
    Ok(Stream { layouts, labels })
}

/// Orders one epoch's batches as `(stream, example indices)`.
fn schedule(
    sizes: &[(usize, usize)],
    batch_size: usize,
    mixing: Mixing,
    shuffle: &mut ChaCha8Rng,
    mix: &mut ChaCha8Rng,
) -> Vec<(usize, Vec<usize>)> {
    let mut queues: Vec<(usize, Vec<Vec<usize>>)> = sizes
        .iter()
        .map(|&(s, n)| {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(shuffle);
            let mut batches: Vec<Vec<usize>> = idx.chunks(batch_size).map(<[usize]>::to_vec).collect();
            batches.reverse();
            (s, batches)
        })
        .collect();
    let mut out = Vec::new();
    match mixing {
        Mixing::RoundRobin => loop {
            let mut any = false;
            for (s, q) in queues.iter_mut() {
                if let Some(b) = q.pop() {
                    out.push((*s, b));
                    any = true;
                }
            }
            if !any {
                break;
            }
        },
        Mixing::Proportional => loop {
            let total: usize = queues.iter().map(|(_, q)| q.len()).sum();
            if total == 0 {
                break;
            }
            let mut pick = mix.random_range(0..total);
            for (s, q) in queues.iter_mut() {
                if pick < q.len() {
                    out.push((*s, q.pop().unwrap()));
                    break;
                }
                pick -= q.len();
            }
        },
    }
    out
}

/// Trains `init` on per-scenario streams (indexed by [`Scenario::index`]).
///
/// Held-out accuracy is measured after every epoch and the epoch with the
/// best mean accuracy is returned; without held-out data the last epoch
/// wins. `observer` sees each epoch as it completes and may end training
/// early by returning `ControlFlow::Break`.
pub fn train(
    init: ModelParameters,
    train_sets: &[Vec<ScenarioExample>; 3],
    heldout_sets: &[Vec<ScenarioExample>; 3],
    config: &TrainConfig,
    observer: &mut dyn FnMut(&EpochStats) -> ControlFlow<()>,
) -> core::result::Result<TrainOutcome, TrainFailure> {
    config.validate()?;
    let mut params = init;
    let no_prefix = config.mode == TrainMode::JointNoPrefix;
    if no_prefix {
        params.config.prefix_enabled = false;
    } else if params.config.active_prefix_len() == 0 && config.mode == TrainMode::Unified {
        return Err(Error::InvalidConfig("unified mode needs a non-empty prefix".into()).into());
    }
    let active = config.mode.active();
    let mut streams = Vec::new();
    let mut heldout = Vec::new();
    for &s in &active {
        let data = &train_sets[s.index()];
        if data.is_empty() {
            return Err(Error::InvalidArgument(alloc::format!("no training examples for {s}")).into());
        }
        streams.push((s, prepare(data, s, &params.config)?));
        let h = &heldout_sets[s.index()];
        if !h.is_empty() {
            heldout.push((s, prepare(h, s, &params.config)?));
        }
    }

    let rules = update_rules(&params, no_prefix);
    let mut opt = AdamW::new(config.optimizer, params.values.len());
    let mut shuffle = ChaCha8Rng::seed_from_u64(config.seed);
    shuffle.set_stream(SHUFFLE_STREAM);
    let mut mix = ChaCha8Rng::seed_from_u64(config.seed);
    mix.set_stream(MIXING_STREAM);
    let mut drop_rng = ChaCha8Rng::seed_from_u64(config.seed);
    drop_rng.set_stream(DROPOUT_STREAM);
    let use_dropout = params.config.dropout > 0.0;

    let mut summary = TrainSummary::default();
    let mut best: Option<(f64, ModelParameters)> = None;
    let sizes: Vec<(usize, usize)> = streams.iter().enumerate().map(|(i, (_, st))| (i, st.layouts.len())).collect();

    for epoch in 1..=config.epochs {
        let plan = schedule(&sizes, config.batch_size, config.mixing, &mut shuffle, &mut mix);
        let mut total_loss = 0.0;
        let mut seen = 0usize;
        for (si, idx) in &plan {
            let st = &streams[*si].1;
            let layouts: Vec<&Layout> = idx.iter().map(|&i| &st.layouts[i]).collect();
            let labels: Vec<u8> = idx.iter().map(|&i| st.labels[i]).collect();
            let rng = if use_dropout { Some(&mut drop_rng) } else { None };
            let (loss, mut grads) = match loss_and_gradient(&params, &layouts, &labels, rng) {
                Ok(r) => r,
                Err(error) => {
                    return Err(TrainFailure { error, summary });
                }
            };
            if summary.initial_batch_loss.is_none() {
                summary.initial_batch_loss = Some(loss / idx.len() as f64);
            }
            if let Some(c) = config.clip_norm {
                clip_grad_norm(&mut grads, c);
            }
            opt.step(&mut params.values, &grads, config.learning_rate, &rules);
            total_loss += loss;
            seen += idx.len();
            summary.total_steps += 1;
        }
        if !params.is_finite() {
            return Err(TrainFailure {
                error: Error::NumericalDivergence,
                summary,
            });
        }
        let mut acc = [None; 3];
        for (s, st) in &heldout {
            acc[s.index()] = Some(accuracy(&params, &st.layouts, &st.labels).map_err(|error| TrainFailure {
                error,
                summary: summary.clone(),
            })?);
        }
        let stats = EpochStats {
            epoch,
            mean_loss: total_loss / seen as f64,
            steps: plan.len(),
            heldout_accuracy: acc,
        };
        let stop = observer(&stats).is_break();
        let score = stats.mean_accuracy().unwrap_or(f64::NEG_INFINITY);
        // Ties go to the later epoch.
        if best.as_ref().is_none_or(|(b, _)| score >= *b) {
            best = Some((score, params.clone()));
            summary.best_epoch = Some(epoch);
        }
        let reached = config.target_accuracy.is_some_and(|t| {
            !heldout.is_empty() && stats.heldout_accuracy.iter().flatten().all(|&a| a >= t)
        });
        summary.epochs.push(stats);
        if reached || stop {
            summary.stopped_early = epoch < config.epochs;
            break;
        }
    }
    let params = best.map(|(_, p)| p).unwrap_or(params);
    Ok(TrainOutcome { params, summary })
}

#[cfg(test)]
mod tests;
