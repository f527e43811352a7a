use rayon::prelude::*;

use super::recipe::check_source_count;
use super::{merge_dare, merge_slerp, merge_ties, DeltaSet, DeltaTensor, MergeError, MergeMethod, MergeParams};
use crate::store::{validate_compatibility, ModelWeights, StoreError, Tensor};

/// Builds the output by running `f` on every base tensor, in parallel.
/// `f` returns the f64 values; narrowing to the base dtype happens here.
pub(crate) fn per_tensor<F>(base: &ModelWeights, f: F) -> Result<ModelWeights, MergeError>
where
    F: Fn(&str, &Tensor) -> Result<Vec<f64>, MergeError> + Sync,
{
    let names: Vec<&str> = base.names().collect();
    let tensors = names
        .par_iter()
        .map(|&name| {
            let t = base.get(name).expect("listed name");
            let values = f(name, t)?;
            Tensor::from_f64(t.dtype(), t.shape().to_vec(), &values).map_err(|e| match e {
                StoreError::NaN { .. } => StoreError::NaN { name: name.to_string() }.into(),
                other => MergeError::from(other),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut out = ModelWeights::new();
    for (name, t) in names.into_iter().zip(tensors) {
        out.insert(name, t)?;
    }
    *out.metadata_mut() = base.metadata().clone();
    Ok(out)
}

/// Every delta must be taken against `base`.
pub(crate) fn check_deltas<'a>(
    base: &ModelWeights,
    deltas: impl IntoIterator<Item = &'a DeltaSet>,
) -> Result<(), MergeError> {
    let expected = base.fingerprint();
    let mut seen = 0;
    for d in deltas {
        seen += 1;
        if d.base_fingerprint() != expected {
            return Err(MergeError::BaseMismatch {
                label: d.source_label().to_string(),
                expected,
                found: d.base_fingerprint(),
            });
        }
    }
    if seen == 0 {
        return Err(MergeError::NoSources);
    }
    Ok(())
}

pub(crate) fn delta_for<'a>(d: &'a DeltaSet, name: &str, base: &Tensor) -> Result<&'a DeltaTensor, MergeError> {
    d.get(name)
        .filter(|t| t.shape == base.shape() && t.values.len() == base.len())
        .ok_or_else(|| MergeError::DeltaLayout {
            label: d.source_label().to_string(),
            name: name.to_string(),
        })
}

/// `base + λ·Σᵢ Δᵢ`, summing deltas in list order.
pub fn merge_task_arithmetic(base: &ModelWeights, deltas: &[DeltaSet], lambda: f64) -> Result<ModelWeights, MergeError> {
    check_deltas(base, deltas)?;
    MergeParams::task_arithmetic(lambda).validate()?;
    per_tensor(base, |name, b| {
        let ds = deltas
            .iter()
            .map(|d| delta_for(d, name, b).map(|t| t.values.as_slice()))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(combine_scaled(b.values(), &ds, lambda))
    })
}

pub(crate) fn combine_scaled(base: &[f32], deltas: &[&[f64]], lambda: f64) -> Vec<f64> {
    (0..base.len())
        .map(|i| {
            let sum: f64 = deltas.iter().map(|d| d[i]).sum();
            f64::from(base[i]) + lambda * sum
        })
        .collect()
}

/// `α·Δa + (1−α)·Δb + base`.
pub fn interpolate_two(
    base: &ModelWeights,
    delta_a: &DeltaSet,
    delta_b: &DeltaSet,
    alpha: f64,
) -> Result<ModelWeights, MergeError> {
    check_deltas(base, [delta_a, delta_b])?;
    MergeParams::interpolate2(alpha).validate()?;
    per_tensor(base, |name, b| {
        let a = &delta_for(delta_a, name, b)?.values;
        let c = &delta_for(delta_b, name, b)?.values;
        Ok(b.values()
            .iter()
            .zip(a.iter().zip(c))
            .map(|(&base, (&x, &y))| (alpha * x + (1.0 - alpha) * y) + f64::from(base))
            .collect())
    })
}

/// Sum in ascending order so the mean does not depend on input order.
fn sorted_mean(values: &mut [f64]) -> f64 {
    values.sort_unstable_by(f64::total_cmp);
    values.iter().sum::<f64>() / values.len() as f64
}

/// Elementwise mean of raw weights; invariant under reordering `models`.
pub fn merge_average(models: &[&ModelWeights]) -> Result<ModelWeights, MergeError> {
    let (&first, rest) = models.split_first().ok_or(MergeError::NoSources)?;
    for m in rest {
        let report = validate_compatibility(first, m);
        if !report.is_compatible() {
            return Err(MergeError::Incompatible(Box::new(report)));
        }
    }
    per_tensor(first, |name, t| {
        let columns: Vec<&[f32]> = models.iter().map(|m| m.get(name).expect("compatible").values()).collect();
        let mut scratch = vec![0.0; models.len()];
        Ok((0..t.len())
            .map(|i| {
                for (s, c) in scratch.iter_mut().zip(&columns) {
                    *s = f64::from(c[i]);
                }
                sorted_mean(&mut scratch)
            })
            .collect())
    })
}

/// The average expressed over deltas: mean of `base + Δᵢ`.
fn merge_average_deltas(base: &ModelWeights, deltas: &[DeltaSet]) -> Result<ModelWeights, MergeError> {
    check_deltas(base, deltas)?;
    per_tensor(base, |name, b| {
        let ds = deltas
            .iter()
            .map(|d| delta_for(d, name, b).map(|t| t.values.as_slice()))
            .collect::<Result<Vec<_>, _>>()?;
        let mut scratch = vec![0.0; ds.len()];
        Ok(b.values()
            .iter()
            .enumerate()
            .map(|(i, &bv)| {
                for (s, d) in scratch.iter_mut().zip(&ds) {
                    *s = f64::from(bv) + d[i];
                }
                sorted_mean(&mut scratch)
            })
            .collect())
    })
}

/// Runs the method selected by `params` over deltas taken against `base`.
pub fn merge_deltas(base: &ModelWeights, deltas: &[DeltaSet], params: &MergeParams) -> Result<ModelWeights, MergeError> {
    check_source_count(params.method, deltas.len())?;
    params.validate()?;
    match params.method {
        MergeMethod::TaskArithmetic => merge_task_arithmetic(base, deltas, params.lambda),
        MergeMethod::Interpolate2 => interpolate_two(base, &deltas[0], &deltas[1], params.alpha),
        MergeMethod::Average => merge_average_deltas(base, deltas),
        MergeMethod::Ties => merge_ties(base, deltas, params.lambda, params.retain_ratio),
        MergeMethod::Dare => merge_dare(base, deltas, params.lambda, params.drop_rate, params.seed),
        MergeMethod::Slerp => merge_slerp(base, &deltas[0], &deltas[1], params.t),
    }
}
