use serde::Serialize;

use super::MergeParams;
use crate::store::{Dtype, ModelWeights};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TensorStat {
    pub name: String,
    pub dtype: Dtype,
    pub shape: Vec<usize>,
    /// Largest |merged − base| over the tensor.
    pub max_abs_delta: f64,
    pub mean_abs_delta: f64,
}

/// Sidecar written next to a merged checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MergeReport {
    pub params: MergeParams,
    pub sources: Vec<String>,
    pub base_fingerprint: String,
    pub output_fingerprint: String,
    pub skipped_tensors: Vec<String>,
    pub tensors: Vec<TensorStat>,
}

pub fn merge_report(
    params: &MergeParams,
    sources: Vec<String>,
    base: &ModelWeights,
    merged: &ModelWeights,
    skipped_tensors: Vec<String>,
) -> MergeReport {
    let tensors = merged
        .sorted_names()
        .into_iter()
        .map(|name| {
            let m = merged.get(name).expect("listed");
            let diffs = base
                .get(name)
                .map(|b| {
                    m.values()
                        .iter()
                        .zip(b.values())
                        .map(|(&x, &y)| (f64::from(x) - f64::from(y)).abs())
                        .collect::<Vec<_>>()
                })
                .unwrap_or_default();
            let max_abs_delta = diffs.iter().copied().fold(0.0, f64::max);
            let mean_abs_delta = if diffs.is_empty() {
                0.0
            } else {
                diffs.iter().sum::<f64>() / diffs.len() as f64
            };
            TensorStat {
                name: name.to_string(),
                dtype: m.dtype(),
                shape: m.shape().to_vec(),
                max_abs_delta,
                mean_abs_delta,
            }
        })
        .collect();
    MergeReport {
        params: *params,
        sources,
        base_fingerprint: format!("{:016x}", base.fingerprint()),
        output_fingerprint: format!("{:016x}", merged.fingerprint()),
        skipped_tensors,
        tensors,
    }
}
