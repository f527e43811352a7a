//! Planning for multi-encoder token fusion: the fused sequence layout,
//! vision-token pruning, sequence budget checks and a closed-form FLOPs model
//! of the language model.

mod budget;
mod config;
mod flops;
mod sequence;

pub use budget::{budget_check, BudgetVerdict};
pub use config::{DropScope, EncoderSpec, FusionConfig, PruningKind, PruningPolicy, DEFAULT_SEQ_CAP};
pub use flops::{estimate_flops, layer_flops, FlopsReport, LayerFlops};
pub use sequence::{apply_pruning, concat_tokens, Segment, SegmentSource, TokenSequence};

#[derive(Debug, thiserror::Error)]
pub enum FusionError {
    #[error("invalid fusion config: {0}")]
    InvalidConfig(String),
    #[error("cannot drop {n} tokens: only {eligible} are eligible")]
    DropExceedsEligible { n: usize, eligible: usize },
    #[error("local-only dropping needs at least one encoder with a local_token_range")]
    NoLocalRange,
    #[error("invalid pruning policy: {0}")]
    InvalidPolicy(String),
}
