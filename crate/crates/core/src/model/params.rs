use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::ModelConfig;
use super::prefix::PrefixBank;
use crate::{Error, Result};

/// Uniform half-width for token, position and prefix embeddings.
pub const EMBED_INIT_RANGE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Init {
    /// `U(-1/sqrt(fan_in), 1/sqrt(fan_in))` with `fan_in = shape[0]`.
    Linear,
    Embedding,
    Zeros,
    Ones,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
    pub init: Init,
    /// Excluded from weight decay (biases and layer-norm parameters).
    pub no_decay: bool,
}

impl TensorSpec {
    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn range(&self) -> core::ops::Range<usize> {
        self.offset..self.offset + self.numel()
    }
}

/// Offsets of every tensor inside one flat parameter buffer.
#[derive(Debug, Clone, Copy)]
pub struct LayerOffsets {
    pub ln1_gain: usize,
    pub ln1_bias: usize,
    pub qkv_w: usize,
    pub qkv_b: usize,
    pub out_w: usize,
    pub out_b: usize,
    pub ln2_gain: usize,
    pub ln2_bias: usize,
    pub ffn_in_w: usize,
    pub ffn_in_b: usize,
    pub ffn_out_w: usize,
    pub ffn_out_b: usize,
}

#[derive(Debug, Clone)]
pub struct Offsets {
    pub token: usize,
    pub position: usize,
    pub prefix: usize,
    pub layers: Vec<LayerOffsets>,
    pub final_gain: usize,
    pub final_bias: usize,
    pub head_w: [usize; 3],
    pub head_b: [usize; 3],
}

#[derive(Debug, Clone)]
pub struct ParamLayout {
    pub tensors: Vec<TensorSpec>,
    pub offsets: Offsets,
    pub total: usize,
}

impl ParamLayout {
    pub fn new(c: &ModelConfig) -> Self {
        let z = c.hidden_dim;
        let mut tensors = Vec::new();
        let mut total = 0;
        let mut add = |name: String, shape: Vec<usize>, init: Init| {
            let no_decay = matches!(init, Init::Zeros | Init::Ones);
            let spec = TensorSpec {
                name,
                shape,
                offset: total,
                init,
                no_decay,
            };
            total += spec.numel();
            let off = spec.offset;
            tensors.push(spec);
            off
        };
        let token = add("embed.token".into(), alloc::vec![c.vocab_size, z], Init::Embedding);
        let position = add("embed.position".into(), alloc::vec![c.max_len, z], Init::Embedding);
        let prefix = add("prefix".into(), alloc::vec![c.prefix_len, z], Init::Embedding);
        let mut layers = Vec::with_capacity(c.n_layers);
        for l in 0..c.n_layers {
            let p = |s: &str| format!("layer{l}.{s}");
            layers.push(LayerOffsets {
                ln1_gain: add(p("ln1.gain"), alloc::vec![z], Init::Ones),
                ln1_bias: add(p("ln1.bias"), alloc::vec![z], Init::Zeros),
                qkv_w: add(p("attn.qkv.weight"), alloc::vec![z, 3 * z], Init::Linear),
                qkv_b: add(p("attn.qv.bias"), alloc::vec![2 * z], Init::Zeros),
                out_w: add(p("attn.out.weight"), alloc::vec![z, z], Init::Linear),
                out_b: add(p("attn.out.bias"), alloc::vec![z], Init::Zeros),
                ln2_gain: add(p("ln2.gain"), alloc::vec![z], Init::Ones),
                ln2_bias: add(p("ln2.bias"), alloc::vec![z], Init::Zeros),
                ffn_in_w: add(p("ffn.in.weight"), alloc::vec![z, c.ffn_dim], Init::Linear),
                ffn_in_b: add(p("ffn.in.bias"), alloc::vec![c.ffn_dim], Init::Zeros),
                ffn_out_w: add(p("ffn.out.weight"), alloc::vec![c.ffn_dim, z], Init::Linear),
                ffn_out_b: add(p("ffn.out.bias"), alloc::vec![z], Init::Zeros),
            });
        }
        let final_gain = add("final_ln.gain".into(), alloc::vec![z], Init::Ones);
        let final_bias = add("final_ln.bias".into(), alloc::vec![z], Init::Zeros);
        let dims = [z, c.mlp_dims[0], c.mlp_dims[1], c.mlp_dims[2]];
        let mut head_w = [0; 3];
        let mut head_b = [0; 3];
        for i in 0..3 {
            head_w[i] = add(format!("head.{i}.weight"), alloc::vec![dims[i], dims[i + 1]], Init::Linear);
            head_b[i] = add(format!("head.{i}.bias"), alloc::vec![dims[i + 1]], Init::Zeros);
        }
        ParamLayout {
            tensors,
            offsets: Offsets {
                token,
                position,
                prefix,
                layers,
                final_gain,
                final_bias,
                head_w,
                head_b,
            },
            total,
        }
    }

    pub fn find(&self, name: &str) -> Option<&TensorSpec> {
        self.tensors.iter().find(|t| t.name == name)
    }
}

/// All trainable weights in one flat buffer described by [`ParamLayout`].
#[derive(Debug, Clone)]
pub struct ModelParameters {
    pub config: ModelConfig,
    pub layout: ParamLayout,
    pub values: Vec<f64>,
}

impl PartialEq for ModelParameters {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config
            && self.values.len() == other.values.len()
            && self
                .values
                .iter()
                .zip(&other.values)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

impl ModelParameters {
    /// Seeded initialization: linear weights uniform in `±1/sqrt(fan_in)`,
    /// embeddings and prefix rows uniform in `±EMBED_INIT_RANGE`, biases
    /// zero, layer-norm gains one.
    pub fn init(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let layout = ParamLayout::new(&config);
        let mut values = alloc::vec![0.0; layout.total];
        let mut rng = ChaCha8Rng::seed_from_u64(config.init_seed);
        for t in &layout.tensors {
            let dst = &mut values[t.range()];
            match t.init {
                Init::Zeros => {}
                Init::Ones => dst.fill(1.0),
                Init::Embedding => {
                    for v in dst {
                        *v = rng.random_range(-EMBED_INIT_RANGE..EMBED_INIT_RANGE);
                    }
                }
                Init::Linear => {
                    let a = 1.0 / crate::math::sqrt(t.shape[0] as f64);
                    for v in dst {
                        *v = rng.random_range(-a..a);
                    }
                }
            }
        }
        Ok(ModelParameters {
            config,
            layout,
            values,
        })
    }

    /// Rebuilds parameters from named tensors, e.g. after loading a file.
    pub fn from_named(config: ModelConfig, tensors: Vec<(String, Vec<usize>, Vec<f64>)>) -> Result<Self> {
        config.validate()?;
        let layout = ParamLayout::new(&config);
        if tensors.len() != layout.tensors.len() {
            return Err(Error::InvalidConfig(format!(
                "expected {} tensors, found {}",
                layout.tensors.len(),
                tensors.len()
            )));
        }
        let mut values = alloc::vec![0.0; layout.total];
        for (spec, (name, shape, data)) in layout.tensors.iter().zip(tensors) {
            if spec.name != name || spec.shape != shape || data.len() != spec.numel() {
                return Err(Error::InvalidConfig(format!(
                    "tensor {name} {shape:?} does not match expected {} {:?}",
                    spec.name, spec.shape
                )));
            }
            values[spec.range()].copy_from_slice(&data);
        }
        let params = ModelParameters {
            config,
            layout,
            values,
        };
        if !params.values.iter().all(|v| v.is_finite()) {
            return Err(Error::NumericalDivergence);
        }
        Ok(params)
    }

    pub fn tensor(&self, name: &str) -> Option<&[f64]> {
        self.layout.find(name).map(|t| &self.values[t.range()])
    }

    pub fn prefix_bank(&self) -> PrefixBank<'_> {
        let c = &self.config;
        let start = self.layout.offsets.prefix;
        PrefixBank::new(
            &self.values[start..start + c.prefix_len * c.hidden_dim],
            c.prefix_len,
            c.hidden_dim,
            c.sr_prefix_order,
        )
    }

    pub fn prefix_range(&self) -> core::ops::Range<usize> {
        self.layout.find("prefix").expect("prefix tensor").range()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}
