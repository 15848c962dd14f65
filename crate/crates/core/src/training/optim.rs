use alloc::vec;
use alloc::vec::Vec;

use crate::math;
use crate::model::ModelParameters;

/// Moment and decay constants for AdamW.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AdamWConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        AdamWConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
        }
    }
}

/// How the optimizer treats one coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateRule {
    Decay,
    NoDecay,
    Frozen,
}

/// Per-coordinate rules: biases and layer-norm parameters skip weight
/// decay, and the prefix rows are frozen when `freeze_prefix` is set.
pub fn update_rules(params: &ModelParameters, freeze_prefix: bool) -> Vec<UpdateRule> {
    let mut rules = vec![UpdateRule::Decay; params.values.len()];
    for t in &params.layout.tensors {
        let rule = if freeze_prefix && t.name == "prefix" {
            UpdateRule::Frozen
        } else if t.no_decay {
            UpdateRule::NoDecay
        } else {
            UpdateRule::Decay
        };
        rules[t.range()].fill(rule);
    }
    rules
}

/// AdamW with decoupled weight decay and bias-corrected moments.
#[derive(Debug, Clone)]
pub struct AdamW {
    pub config: AdamWConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamW {
    pub fn new(config: AdamWConfig, n: usize) -> Self {
        AdamW {
            config,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, values: &mut [f64], grads: &[f64], lr: f64, rules: &[UpdateRule]) {
        assert_eq!(values.len(), grads.len());
        assert_eq!(values.len(), rules.len());
        self.t += 1;
        let c = self.config;
        let bc1 = 1.0 - math::powf(c.beta1, self.t as f64);
        let bc2 = 1.0 - math::powf(c.beta2, self.t as f64);
        for i in 0..values.len() {
            let rule = rules[i];
            if rule == UpdateRule::Frozen {
                continue;
            }
            let g = grads[i];
            self.m[i] = c.beta1 * self.m[i] + (1.0 - c.beta1) * g;
            self.v[i] = c.beta2 * self.v[i] + (1.0 - c.beta2) * g * g;
            let mhat = self.m[i] / bc1;
            let vhat = self.v[i] / bc2;
            let decay = if rule == UpdateRule::Decay { c.weight_decay * values[i] } else { 0.0 };
            let delta = lr * (mhat / (math::sqrt(vhat) + c.eps) + decay);
            // Skipping zero updates keeps the sign of -0.0 intact.
            if delta != 0.0 {
                values[i] -= delta;
            }
        }
    }
}

pub fn global_norm(grads: &[f64]) -> f64 {
    math::sqrt(grads.iter().map(|g| g * g).sum())
}

/// Rescales `grads` so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_grad_norm(grads: &mut [f64], max_norm: f64) -> f64 {
    let norm = global_norm(grads);
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        grads.iter_mut().for_each(|g| *g *= s);
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_learning_rate_is_identity() {
        let mut vals = vec![0.5, -0.0, 1e-300, -3.25, 7.0];
        let before = vals.clone();
        let mut opt = AdamW::new(AdamWConfig::default(), vals.len());
        let rules = [UpdateRule::Decay; 5];
        for _ in 0..3 {
            opt.step(&mut vals, &[1.0, -2.0, 0.0, 1e6, 3.0], 0.0, &rules);
        }
        for (a, b) in vals.iter().zip(&before) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // With bias correction the first update has magnitude ~lr.
        let mut vals = vec![1.0, 1.0];
        let mut opt = AdamW::new(
            AdamWConfig {
                weight_decay: 0.0,
                ..Default::default()
            },
            2,
        );
        opt.step(&mut vals, &[0.3, -4.0], 0.01, &[UpdateRule::NoDecay; 2]);
        assert!((vals[0] - 0.99).abs() < 1e-6);
        assert!((vals[1] - 1.01).abs() < 1e-6);
    }

    #[test]
    fn decay_and_freeze_rules() {
        let mut vals = vec![2.0, 2.0, 2.0];
        let mut opt = AdamW::new(AdamWConfig::default(), 3);
        let rules = [UpdateRule::Decay, UpdateRule::NoDecay, UpdateRule::Frozen];
        opt.step(&mut vals, &[0.0; 3], 0.1, &rules);
        assert!((vals[0] - 2.0 * (1.0 - 0.1 * 0.01)).abs() < 1e-15);
        assert_eq!(vals[1], 2.0);
        assert_eq!(vals[2], 2.0);
    }

    #[test]
    fn clipping() {
        let mut g = vec![3.0, 4.0];
        assert_eq!(clip_grad_norm(&mut g, 1.0), 5.0);
        assert!((global_norm(&g) - 1.0).abs() < 1e-15);
        let mut small = vec![0.1, 0.1];
        clip_grad_norm(&mut small, 1.0);
        assert_eq!(small, vec![0.1, 0.1]);
    }
}
