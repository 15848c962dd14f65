//! Prefix-conditioned transformer scorer.
//!
//! Inputs are assembled per scenario, encoded, mean-pooled over content and
//! special positions, and classified by a three-layer tanh MLP; the
//! positive-class probability is the score.

mod config;
mod head;
mod layout;
mod network;
mod params;
mod prefix;

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand_chacha::ChaCha8Rng;

pub use config::{ModelConfig, SrPrefixOrder, CANDIDATE_CAP};
pub use head::{head_backward, head_forward, softmax2, HeadCache};
pub use layout::{assemble_input, pad_batch, Layout, Slot};
pub use network::{encode_backward, encode_batch, EncoderCache, Segment};
pub use params::{Init, ModelParameters, ParamLayout, TensorSpec, EMBED_INIT_RANGE};
pub use prefix::{prefix_order, PrefixBank};

use crate::{Error, Result, Scenario};

/// Classifier output for one input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreOutput {
    pub scenario: Scenario,
    /// `(p-, p+)`.
    pub p: [f64; 2],
    /// Equal to `p[1]`.
    pub score: f64,
}

/// Encodes a single layout and returns its `len × z` token representations.
pub fn encode(params: &ModelParameters, layout: &Layout) -> Result<Vec<f64>> {
    Ok(encode_batch(params, &[layout], None)?.hidden)
}

/// Mean of the rows of `hidden` that the layout marks as pooled.
pub fn pool(hidden: &[f64], layout: &Layout, z: usize) -> Vec<f64> {
    let mut e = vec![0.0; z];
    let mut count = 0usize;
    for pos in 0..layout.len() {
        if layout.pooled(pos) {
            count += 1;
            for (acc, h) in e.iter_mut().zip(&hidden[pos * z..(pos + 1) * z]) {
                *acc += h;
            }
        }
    }
    let inv = 1.0 / count.max(1) as f64;
    e.iter_mut().for_each(|x| *x *= inv);
    e
}

pub fn classify(params: &ModelParameters, pooled: &[f64], scenario: Scenario) -> ScoreOutput {
    let head = head_forward(params, pooled.to_vec());
    ScoreOutput {
        scenario,
        p: [head.probs[0], head.probs[1]],
        score: head.probs[1],
    }
}

/// A complete forward pass over a batch, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub encoder: EncoderCache,
    pub head: HeadCache,
    /// Per packed row: `1 / pooled_count` for pooled rows, else zero.
    pool_weight: Vec<f64>,
}

impl ForwardPass {
    pub fn scores(&self) -> Vec<f64> {
        self.head.probs.chunks(2).map(|p| p[1]).collect()
    }

    pub fn probs(&self, i: usize) -> [f64; 2] {
        [self.head.probs[2 * i], self.head.probs[2 * i + 1]]
    }
}

pub fn forward(params: &ModelParameters, layouts: &[&Layout], dropout: Option<&mut ChaCha8Rng>) -> Result<ForwardPass> {
    let z = params.config.hidden_dim;
    let encoder = encode_batch(params, layouts, dropout)?;
    let mut pooled = Vec::with_capacity(layouts.len() * z);
    let mut pool_weight = vec![0.0; encoder.rows()];
    for (i, l) in layouts.iter().enumerate() {
        pooled.extend(pool(encoder.segment_hidden(i, z), l, z));
        let start = encoder.segments[i].start;
        let w = 1.0 / l.pooled_count().max(1) as f64;
        for pos in 0..l.len() {
            if l.pooled(pos) {
                pool_weight[start + pos] = w;
            }
        }
    }
    let head = head_forward(params, pooled);
    if !head.probs.iter().all(|p| p.is_finite()) {
        return Err(Error::NumericalDivergence);
    }
    Ok(ForwardPass {
        encoder,
        head,
        pool_weight,
    })
}

/// Accumulates parameter gradients for a loss with logit gradient
/// `dlogits` (batch × 2).
pub fn backward(params: &ModelParameters, pass: &ForwardPass, dlogits: &[f64], grads: &mut [f64]) {
    let z = params.config.hidden_dim;
    assert_eq!(grads.len(), params.values.len());
    let de = head_backward(params, &pass.head, dlogits, grads);
    let mut dh = vec![0.0; pass.encoder.rows() * z];
    for (i, seg) in pass.encoder.segments.iter().enumerate() {
        let de_i = &de[i * z..(i + 1) * z];
        for r in seg.start..seg.start + seg.len {
            let w = pass.pool_weight[r];
            if w != 0.0 {
                for (d, g) in dh[r * z..(r + 1) * z].iter_mut().zip(de_i) {
                    *d = g * w;
                }
            }
        }
    }
    encode_backward(params, &pass.encoder, &dh, grads);
}

/// Scores one input in inference mode.
pub fn score(
    params: &ModelParameters,
    scenario: Scenario,
    candidate: &[u32],
    reference: Option<&[u32]>,
    document: Option<&[u32]>,
) -> Result<ScoreOutput> {
    let layout = assemble_input(scenario, candidate, reference, document, &params.config)?;
    score_layouts(params, &[&layout]).map(|v| v[0])
}

/// Scores pre-assembled layouts as one packed batch.
pub fn score_layouts(params: &ModelParameters, layouts: &[&Layout]) -> Result<Vec<ScoreOutput>> {
    if layouts.is_empty() {
        return Ok(Vec::new());
    }
    let pass = forward(params, layouts, None)?;
    Ok(layouts
        .iter()
        .enumerate()
        .map(|(i, l)| {
            let p = pass.probs(i);
            ScoreOutput {
                scenario: l.scenario,
                p,
                score: p[1],
            }
        })
        .collect())
}

/// Ways to combine Sum-Ref and Sum-Doc scores into a Sum-Doc-Ref score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum FusionMethod {
    Min,
    Max,
    GeometricMean,
    #[default]
    ArithmeticMean,
}

impl FusionMethod {
    pub const ALL: [FusionMethod; 4] = [
        FusionMethod::Min,
        FusionMethod::Max,
        FusionMethod::GeometricMean,
        FusionMethod::ArithmeticMean,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FusionMethod::Min => "min",
            FusionMethod::Max => "max",
            FusionMethod::GeometricMean => "geometric_mean",
            FusionMethod::ArithmeticMean => "arithmetic_mean",
        }
    }
}

impl fmt::Display for FusionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FusionMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FusionMethod::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(alloc::format!("unknown fusion method {s:?}")))
    }
}

pub fn fuse(s_sr: f64, s_sd: f64, method: FusionMethod) -> Result<f64> {
    for s in [s_sr, s_sd] {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::ScoreOutOfRange(s));
        }
    }
    Ok(match method {
        FusionMethod::Min => s_sr.min(s_sd),
        FusionMethod::Max => s_sr.max(s_sd),
        FusionMethod::GeometricMean => crate::math::sqrt(s_sr * s_sd),
        FusionMethod::ArithmeticMean => (s_sr + s_sd) / 2.0,
    })
}
