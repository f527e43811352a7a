//! Spherical interpolation between two delta sets, per tensor on the
//! flattened vectors.

use super::methods::{check_deltas, delta_for, per_tensor};
use super::{DeltaSet, MergeError, MergeParams};
use crate::store::ModelWeights;

const MIN_SIN: f64 = 1e-6;
const MIN_NORM: f64 = 1e-12;

/// SLERP from `a` (t = 0) to `b` (t = 1). Nearly parallel or near-zero
/// vectors fall back to linear interpolation.
pub fn slerp_vectors(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    let norm_a = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let norm_b = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let lerp = || a.iter().zip(b).map(|(&x, &y)| (1.0 - t) * x + t * y).collect();
    if norm_a < MIN_NORM || norm_b < MIN_NORM {
        return lerp();
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let omega = (dot / (norm_a * norm_b)).clamp(-1.0, 1.0).acos();
    let sin_omega = omega.sin();
    if sin_omega < MIN_SIN {
        return lerp();
    }
    let ca = ((1.0 - t) * omega).sin() / sin_omega;
    let cb = (t * omega).sin() / sin_omega;
    a.iter().zip(b).map(|(&x, &y)| ca * x + cb * y).collect()
}

pub fn merge_slerp(
    base: &ModelWeights,
    delta_a: &DeltaSet,
    delta_b: &DeltaSet,
    t: f64,
) -> Result<ModelWeights, MergeError> {
    check_deltas(base, [delta_a, delta_b])?;
    MergeParams::slerp(t).validate()?;
    per_tensor(base, |name, b| {
        let x = &delta_for(delta_a, name, b)?.values;
        let y = &delta_for(delta_b, name, b)?.values;
        Ok(b.values()
            .iter()
            .zip(slerp_vectors(x, y, t))
            .map(|(&bv, r)| f64::from(bv) + r)
            .collect())
    })
}
