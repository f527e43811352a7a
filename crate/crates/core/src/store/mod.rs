//! In-memory checkpoint model and the safetensors container codec.

mod compat;
mod dtype;
mod format;
mod tensor;
mod weights;

pub use compat::{validate_compatibility, CompatReport, Mismatch};
pub use dtype::Dtype;
pub use format::{
    decode_safetensors, encode_safetensors, load_safetensors, load_safetensors_with,
    save_safetensors, LoadOptions, LoadWarning, Loaded,
};
pub use tensor::Tensor;
pub use weights::ModelWeights;

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed header length: {0}")]
    HeaderLength(String),
    #[error("invalid header JSON: {0}")]
    Json(String),
    #[error("unsupported dtype {0:?}")]
    UnsupportedDtype(String),
    #[error("tensor {name:?}: size mismatch, shape {shape:?} as {dtype} needs {expected} bytes, offsets span {actual}")]
    SizeMismatch {
        name: String,
        shape: Vec<usize>,
        dtype: Dtype,
        expected: u64,
        actual: u64,
    },
    #[error("tensor {name:?}: data offsets [{start}, {end}) out of bounds for data region of {len} bytes")]
    OutOfBounds {
        name: String,
        start: u64,
        end: u64,
        len: u64,
    },
    #[error("tensors {first:?} and {second:?} have overlapping data offsets")]
    Overlap { first: String, second: String },
    #[error("tensor shape {shape:?} holds {expected} elements, got {actual} values")]
    ElementCount {
        shape: Vec<usize>,
        expected: usize,
        actual: usize,
    },
    #[error("tensor {name:?} contains NaN")]
    NaN { name: String },
    #[error("invalid tensor name {0:?}: names must be non-empty and contain no NUL bytes")]
    InvalidName(String),
    #[error("duplicate tensor name {0:?}")]
    DuplicateName(String),
    #[error("tensor {0:?} is larger than the addressable file size")]
    TooLarge(String),
}
