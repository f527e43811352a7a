use serde::{Deserialize, Serialize};

use super::sequence::{concat_tokens, Segment, SegmentSource, TokenSequence};
use super::FusionError;

pub const DEFAULT_SEQ_CAP: usize = 4096;

/// One vision encoder (preprocessing + encoder + projector) as seen by the
/// language model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncoderSpec {
    pub name: String,
    pub token_len: usize,
    pub hidden_dim: usize,
    /// Half-open `[start, end)` range of this encoder's local-feature tokens.
    #[serde(default)]
    pub local_token_range: Option<[usize; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropScope {
    All,
    LocalOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PruningKind {
    None,
    /// Remove `n` vision tokens uniformly at random from `scope`.
    RandomDrop { n: usize, scope: DropScope },
    /// From layer `start_layer` (0-based) on, keep `⌈keep_ratio·V⌉` of the
    /// `V` vision tokens. A cost annotation only; the sequence is unchanged.
    LayerSparsity { start_layer: usize, keep_ratio: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PruningPolicy {
    #[serde(flatten)]
    pub kind: PruningKind,
    #[serde(default)]
    pub seed: u64,
}

impl Default for PruningPolicy {
    fn default() -> Self {
        Self::none()
    }
}

impl PruningPolicy {
    pub fn none() -> Self {
        Self { kind: PruningKind::None, seed: 0 }
    }

    pub fn random_drop(n: usize, scope: DropScope, seed: u64) -> Self {
        Self { kind: PruningKind::RandomDrop { n, scope }, seed }
    }

    pub fn layer_sparsity(start_layer: usize, keep_ratio: f64) -> Self {
        Self {
            kind: PruningKind::LayerSparsity { start_layer, keep_ratio },
            seed: 0,
        }
    }

    pub fn is_randomized(&self) -> bool {
        matches!(self.kind, PruningKind::RandomDrop { n, .. } if n > 0)
    }
}

fn default_seq_cap() -> usize {
    DEFAULT_SEQ_CAP
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FusionConfig {
    pub encoders: Vec<EncoderSpec>,
    pub text_len: usize,
    pub model_dim: usize,
    pub num_layers: usize,
    pub num_heads: usize,
    #[serde(default = "default_seq_cap")]
    pub seq_cap: usize,
    #[serde(default)]
    pub pruning: PruningPolicy,
}

impl FusionConfig {
    pub fn validate(&self) -> Result<(), FusionError> {
        let bad = |msg: String| Err(FusionError::InvalidConfig(msg));
        if self.model_dim == 0 || self.num_layers == 0 || self.num_heads == 0 || self.seq_cap == 0 {
            return bad("model_dim, num_layers, num_heads and seq_cap must be positive".into());
        }
        for (i, e) in self.encoders.iter().enumerate() {
            if e.name.is_empty() || e.name == SegmentSource::TEXT {
                return bad(format!("encoders[{i}].name must be non-empty and not \"text\""));
            }
            if self.encoders[..i].iter().any(|o| o.name == e.name) {
                return bad(format!("encoders[{i}].name {:?} is duplicated", e.name));
            }
            if e.token_len == 0 {
                return bad(format!("encoders[{i}].token_len must be positive"));
            }
            if e.hidden_dim != self.model_dim {
                return bad(format!(
                    "encoders[{i}].hidden_dim {} differs from model_dim {}",
                    e.hidden_dim, self.model_dim
                ));
            }
            if let Some([start, end]) = e.local_token_range {
                if start >= end || end > e.token_len {
                    return bad(format!(
                        "encoders[{i}].local_token_range [{start}, {end}) is not inside [0, {})",
                        e.token_len
                    ));
                }
            }
        }
        match self.pruning.kind {
            PruningKind::LayerSparsity { start_layer, keep_ratio } => {
                if !(keep_ratio > 0.0 && keep_ratio <= 1.0) {
                    return Err(FusionError::InvalidPolicy(format!("keep_ratio {keep_ratio} not in (0, 1]")));
                }
                if start_layer >= self.num_layers {
                    return Err(FusionError::InvalidPolicy(format!(
                        "start_layer {start_layer} must be below num_layers {}",
                        self.num_layers
                    )));
                }
            }
            PruningKind::RandomDrop { .. } | PruningKind::None => {}
        }
        Ok(())
    }

    pub fn vision_len(&self) -> usize {
        self.encoders.iter().map(|e| e.token_len).sum()
    }

    /// `Σ L_enc + L_text` before pruning.
    pub fn fused_len(&self) -> usize {
        self.vision_len() + self.text_len
    }

    /// One full segment per encoder, in roster order.
    pub fn vision_segments(&self) -> Vec<Segment> {
        self.encoders.iter().map(Segment::full).collect()
    }

    pub fn fused_sequence(&self) -> TokenSequence {
        concat_tokens(self.vision_segments(), self.text_len)
    }

    /// Same model, restricted to a subset of encoders.
    pub fn with_encoders(&self, names: &[&str]) -> FusionConfig {
        FusionConfig {
            encoders: self.encoders.iter().filter(|e| names.contains(&e.name.as_str())).cloned().collect(),
            ..self.clone()
        }
    }
}
