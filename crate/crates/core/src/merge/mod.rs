//! Delta parameters and the merging methods built on them.
//!
//! Arithmetic runs in f64: the difference of two f32 values is exact in f64
//! (for exponent gaps up to 29 bits), so `base + (model - base)` rounds back
//! to `model` bit-exactly and the degenerate settings of every method recover
//! a source checkpoint. Results are narrowed once to the base tensor's dtype.
//!
//! Per-tensor work runs on the rayon pool; outputs do not depend on the number
//! of workers.

mod dare;
mod delta;
mod grid;
mod methods;
mod recipe;
mod report;
mod slerp;
mod ties;

pub use dare::{dare_mask_scale, merge_dare};
pub use delta::{compute_delta, compute_delta_partial, DeltaSet, DeltaTensor};
pub use grid::{grid_search, grid_search_par, GridResult, MergeGrid};
pub use methods::{interpolate_two, merge_average, merge_deltas, merge_task_arithmetic};
pub use recipe::{MergeMethod, MergeParams, MergeRecipe, SourceRef};
pub use report::{merge_report, MergeReport, TensorStat};
pub use slerp::{merge_slerp, slerp_vectors};
pub use ties::{merge_ties, ties_combine, trim_top_k};

use crate::store::{CompatReport, StoreError};

#[derive(Debug, thiserror::Error)]
pub enum MergeError {
    #[error("models are incompatible: {0}")]
    Incompatible(Box<CompatReport>),
    #[error("delta {label:?} computed against a different base (expected fingerprint {expected:016x}, found {found:016x})")]
    BaseMismatch { label: String, expected: u64, found: u64 },
    #[error("delta {label:?} has no entry matching base tensor {name:?}")]
    DeltaLayout { label: String, name: String },
    #[error("at least one source model is required")]
    NoSources,
    #[error("{method} needs exactly {expected} sources, got {got}")]
    SourceCount {
        method: MergeMethod,
        expected: usize,
        got: usize,
    },
    #[error("parameter {name} = {value} out of range: {expected}")]
    Parameter {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },
    #[error("delta file is missing metadata key {0:?}")]
    MissingMetadata(&'static str),
    #[error("grid axis {0} is empty")]
    EmptyGrid(&'static str),
    #[error("evaluator failed for {params}: {message}")]
    Evaluator { params: String, message: String },
    #[error(transparent)]
    Store(#[from] StoreError),
}

pub(crate) fn check_range(
    name: &'static str,
    value: f64,
    ok: bool,
    expected: &'static str,
) -> Result<(), MergeError> {
    if ok && value.is_finite() {
        Ok(())
    } else {
        Err(MergeError::Parameter { name, value, expected })
    }
}
