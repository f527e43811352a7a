//! Training-free fusion of vision encoders across a family of multimodal
//! models that share one pretrained language model.
//!
//! - [`store`]: checkpoint data model and safetensors codec.
//! - [`merge`]: delta parameters and merging (task arithmetic, interpolation,
//!   average, TIES, DARE, SLERP) plus coefficient grid search.
//! - [`fusion`]: vision-token concatenation, pruning, sequence budgets and
//!   FLOPs estimation.
//! - [`toy`]: a small decoder and synthetic encoders that run the whole
//!   merge → encode → concatenate → predict procedure.
//! - [`analysis`]: top-p% attention IoU and feature distribution statistics.

pub mod analysis;
pub mod fusion;
pub mod merge;
pub mod rng;
pub mod store;
pub mod toy;
mod util;

pub use store::{
    load_safetensors, save_safetensors, validate_compatibility, CompatReport, Dtype, ModelWeights,
    StoreError, Tensor,
};
pub use merge::{DeltaSet, MergeError, MergeMethod, MergeParams, MergeRecipe, SourceRef};
pub use fusion::{FlopsReport, FusionConfig, FusionError, PruningPolicy, TokenSequence};
pub use toy::{AttentionMap, ToyConfig, ToyError, ToyFamily};
pub use analysis::{AnalysisError, IoUCurve, TokenScoreVector};
