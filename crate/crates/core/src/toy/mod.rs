//! A small pre-norm causal decoder with synthetic vision encoders, used to
//! run merge → encode → concatenate → predict end to end on real
//! checkpoints and to expose text→vision attention.

mod attention;
mod config;
mod encoder;
mod family;
mod matrix;
mod model;
mod pipeline;

pub use attention::AttentionMap;
pub use config::{ToyConfig, ToyEncoderConfig};
pub use encoder::{encode_image, EncoderBundle, PreprocessSpec};
pub use family::{build_toy_family, reserved_block, ToyFamily};
pub use matrix::{Matrix, OpCounter};
pub use model::{forward, init_base_weights, ForwardOutput};
pub use pipeline::{resolve_ref, run_pipeline, FlopsComparison, PipelineOutput, BASE_REF};

use crate::merge::MergeError;
use crate::store::StoreError;

#[derive(Debug, thiserror::Error)]
pub enum ToyError {
    #[error("invalid toy config: {0}")]
    Config(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("family: {0}")]
    Family(String),
    #[error(transparent)]
    Merge(#[from] MergeError),
    #[error(transparent)]
    Store(#[from] StoreError),
}
