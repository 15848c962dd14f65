use alloc::format;

use crate::{Error, Result};

/// Candidate summaries longer than this are cut from the tail before any
/// other truncation happens.
pub const CANDIDATE_CAP: usize = 128;

/// Order in which the Sum-Ref scenario reads the shared prefix rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SrPrefixOrder {
    #[default]
    Reversed,
    /// Even positions ascending, then odd positions ascending.
    EvenThenOdd,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub hidden_dim: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub ffn_dim: usize,
    pub prefix_len: usize,
    pub max_len: usize,
    pub mlp_dims: [usize; 3],
    pub dropout: f64,
    pub init_seed: u64,
    pub sr_prefix_order: SrPrefixOrder,
    /// When false, inputs carry no prefix slots at all.
    pub prefix_enabled: bool,
}

impl ModelConfig {
    /// Desk-scale defaults: 4 layers, 4 heads, hidden 128, prefix 16.
    pub fn desk(vocab_size: usize) -> Self {
        Self::scaled(vocab_size, 128, 4, 4, 512, 16)
    }

    /// The gradient-check model: hidden 16, one layer, prefix 4.
    pub fn tiny(vocab_size: usize) -> Self {
        ModelConfig {
            max_len: 64,
            ..Self::scaled(vocab_size, 16, 1, 2, 32, 4)
        }
    }

    /// A config whose classifier dims follow `[3z, z, 2]`.
    pub fn scaled(
        vocab_size: usize,
        hidden_dim: usize,
        n_layers: usize,
        n_heads: usize,
        ffn_dim: usize,
        prefix_len: usize,
    ) -> Self {
        ModelConfig {
            vocab_size,
            hidden_dim,
            n_layers,
            n_heads,
            ffn_dim,
            prefix_len,
            max_len: 512,
            mlp_dims: [3 * hidden_dim, hidden_dim, 2],
            dropout: 0.0,
            init_seed: 12,
            sr_prefix_order: SrPrefixOrder::Reversed,
            prefix_enabled: true,
        }
    }

    pub fn head_dim(&self) -> usize {
        self.hidden_dim / self.n_heads
    }

    /// Prefix slots actually placed in inputs.
    pub fn active_prefix_len(&self) -> usize {
        if self.prefix_enabled {
            self.prefix_len
        } else {
            0
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: alloc::string::String| Err(Error::InvalidConfig(m));
        if self.vocab_size < crate::corpus::NUM_SPECIAL as usize {
            return bad(format!("vocab_size {} is below the special token count", self.vocab_size));
        }
        if self.hidden_dim == 0 || self.n_heads == 0 || !self.hidden_dim.is_multiple_of(self.n_heads) {
            return bad(format!(
                "hidden_dim {} must be a positive multiple of n_heads {}",
                self.hidden_dim, self.n_heads
            ));
        }
        if self.ffn_dim == 0 {
            return bad("ffn_dim must be positive".into());
        }
        if self.prefix_len + 4 > self.max_len {
            return bad(format!(
                "prefix_len {} + 3 specials + 1 content token exceeds max_len {}",
                self.prefix_len, self.max_len
            ));
        }
        if self.mlp_dims[2] != 2 || self.mlp_dims[0] == 0 || self.mlp_dims[1] == 0 {
            return bad(format!("mlp_dims {:?} must be positive and end in 2", self.mlp_dims));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let c = ModelConfig::desk(100);
        c.validate().unwrap();
        assert_eq!(c.mlp_dims, [384, 128, 2]);
        assert_eq!(c.max_len, 512);
        ModelConfig::tiny(50).validate().unwrap();
        // The large-scale shape is expressible with the same schema.
        let big = ModelConfig::scaled(50_000, 1024, 24, 16, 4096, 128);
        big.validate().unwrap();
        assert_eq!(big.mlp_dims, [3072, 1024, 2]);
    }

    #[test]
    fn invalid_configs() {
        let mut c = ModelConfig::desk(100);
        c.n_heads = 3;
        assert!(c.validate().is_err());
        let mut c = ModelConfig::desk(100);
        c.prefix_len = 509;
        assert!(c.validate().is_err());
        c.prefix_len = 508;
        assert!(c.validate().is_ok());
        let mut c = ModelConfig::desk(100);
        c.mlp_dims = [10, 10, 3];
        assert!(c.validate().is_err());
    }
}
