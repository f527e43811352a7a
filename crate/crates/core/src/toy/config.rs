use serde::{Deserialize, Serialize};

use super::ToyError;
use crate::fusion::{EncoderSpec, FusionConfig, PruningPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToyEncoderConfig {
    /// Width of the raw per-token features after preprocessing.
    pub feature_dim: usize,
    pub token_len: usize,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToyConfig {
    pub model_dim: usize,
    pub num_layers: usize,
    pub num_heads: usize,
    pub vocab_size: usize,
    pub max_seq: usize,
    pub encoders: Vec<ToyEncoderConfig>,
    pub image_dim: usize,
    /// Learned absolute positions; off for order-permutation checks.
    #[serde(default = "yes")]
    pub use_positions: bool,
}

impl ToyConfig {
    pub fn validate(&self) -> Result<(), ToyError> {
        let bad = |m: String| Err(ToyError::Config(m));
        if self.model_dim == 0 || self.num_layers == 0 || self.num_heads == 0 {
            return bad("model_dim, num_layers and num_heads must be positive".into());
        }
        if !self.model_dim.is_multiple_of(self.num_heads) {
            return bad(format!(
                "model_dim {} is not divisible by num_heads {}",
                self.model_dim, self.num_heads
            ));
        }
        if self.vocab_size == 0 || self.max_seq == 0 || self.image_dim == 0 {
            return bad("vocab_size, max_seq and image_dim must be positive".into());
        }
        for (i, e) in self.encoders.iter().enumerate() {
            if e.feature_dim == 0 || e.token_len == 0 {
                return bad(format!("encoders[{i}] needs positive feature_dim and token_len"));
            }
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.model_dim / self.num_heads
    }

    /// The matching planner config for a given encoder subset.
    pub fn fusion_config(&self, encoders: &[usize], text_len: usize) -> FusionConfig {
        FusionConfig {
            encoders: encoders
                .iter()
                .map(|&i| EncoderSpec {
                    name: format!("enc{i}"),
                    token_len: self.encoders[i].token_len,
                    hidden_dim: self.model_dim,
                    local_token_range: None,
                })
                .collect(),
            text_len,
            model_dim: self.model_dim,
            num_layers: self.num_layers,
            num_heads: self.num_heads,
            seq_cap: self.max_seq,
            pruning: PruningPolicy::none(),
        }
    }
}
