use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{loss_and_gradient, assemble_example};
use crate::corpus::NUM_SPECIAL;
use crate::datagen::ScenarioExample;
use crate::model::{head_backward, head_forward, Layout, ModelConfig, ModelParameters};
use crate::{Result, Scenario};

const FD_STEP: f64 = 1e-5;
const REL_FLOOR: f64 = 1e-8;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(REL_FLOOR);
    (analytic - numeric).abs() / denom
}

fn random_tokens(rng: &mut ChaCha8Rng, vocab: usize, lo: usize, hi: usize) -> Vec<u32> {
    let n = rng.random_range(lo..=hi);
    (0..n)
        .map(|_| rng.random_range(NUM_SPECIAL..vocab as u32))
        .collect()
}

fn probe_batch(config: &ModelConfig, rng: &mut ChaCha8Rng) -> Vec<ScenarioExample> {
    let v = config.vocab_size;
    let mut out = Vec::new();
    for (i, s) in Scenario::ALL.into_iter().enumerate() {
        for j in 0..2 {
            out.push(ScenarioExample {
                scenario: s,
                candidate: random_tokens(rng, v, 2, 6),
                reference: s.needs_reference().then(|| random_tokens(rng, v, 2, 6)),
                document: s.needs_document().then(|| random_tokens(rng, v, 3, 9)),
                label: ((i + j) % 2) as u8,
            });
        }
    }
    out
}

/// Worst relative error between the analytic gradient and central finite
/// differences over `n_coords` random coordinates of a freshly initialized
/// model, on a small random batch covering all three scenarios.
pub fn grad_check(config: &ModelConfig, n_coords: usize, seed: u64) -> Result<f64> {
    let mut params = ModelParameters::init(config.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let batch = probe_batch(config, &mut rng);
    let layouts = batch
        .iter()
        .map(|ex| assemble_example(ex, config))
        .collect::<Result<Vec<Layout>>>()?;
    let refs: Vec<&Layout> = layouts.iter().collect();
    let labels: Vec<u8> = batch.iter().map(|e| e.label).collect();
    let (_, grads) = loss_and_gradient(&params, &refs, &labels, None)?;
    let mut worst = 0.0f64;
    for _ in 0..n_coords {
        let i = rng.random_range(0..params.values.len());
        let orig = params.values[i];
        params.values[i] = orig + FD_STEP;
        let (lp, _) = loss_and_gradient(&params, &refs, &labels, None)?;
        params.values[i] = orig - FD_STEP;
        let (lm, _) = loss_and_gradient(&params, &refs, &labels, None)?;
        params.values[i] = orig;
        let e = relative_error(grads[i], (lp - lm) / (2.0 * FD_STEP));
        worst = worst.max(e);
    }
    Ok(worst)
}

/// The same comparison restricted to the classifier's output layer, whose
/// logits are linear in its parameters, under a linear objective. Finite
/// differences are exact there up to rounding.
pub fn grad_check_linear_head(config: &ModelConfig, seed: u64) -> Result<f64> {
    let mut params = ModelParameters::init(config.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = config.hidden_dim;
    let batch = 4;
    let e: Vec<f64> = (0..batch * z).map(|_| rng.random_range(-1.0..1.0)).collect();
    let r: Vec<f64> = (0..batch * 2).map(|_| rng.random_range(-1.0..1.0)).collect();
    let objective = |p: &ModelParameters| -> f64 {
        head_forward(p, e.clone())
            .logits
            .iter()
            .zip(&r)
            .map(|(l, w)| l * w)
            .sum()
    };
    let cache = head_forward(&params, e.clone());
    let mut grads = vec![0.0; params.values.len()];
    head_backward(&params, &cache, &r, &mut grads);
    let o = params.layout.offsets.head_w[2];
    let end = params.layout.offsets.head_b[2] + config.mlp_dims[2];
    let mut worst = 0.0f64;
    for i in o..end {
        let orig = params.values[i];
        params.values[i] = orig + FD_STEP;
        let fp = objective(&params);
        params.values[i] = orig - FD_STEP;
        let fm = objective(&params);
        params.values[i] = orig;
        worst = worst.max(relative_error(grads[i], (fp - fm) / (2.0 * FD_STEP)));
    }
    Ok(worst)
}
