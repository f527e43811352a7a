//! DARE: drop each delta entry with probability `p`, rescale survivors by
//! `1/(1−p)`, then combine as task arithmetic.
//!
//! The mask for `(seed, source label, tensor name)` comes from a SplitMix64
//! stream keyed by FNV-1a over those three, so results do not depend on the
//! order tensors are visited or on the worker count.

use super::methods::{check_deltas, combine_scaled, delta_for, per_tensor};
use super::{DeltaSet, MergeError, MergeParams};
use crate::rng::SplitMix64;
use crate::store::ModelWeights;

/// Drops and rescales one delta tensor in place of a copy.
pub fn dare_mask_scale(values: &[f64], drop_rate: f64, seed: u64, label: &str, tensor: &str) -> Vec<f64> {
    let mut rng = SplitMix64::for_key(seed, &[label, tensor]);
    let scale = 1.0 / (1.0 - drop_rate);
    values
        .iter()
        .map(|&v| if rng.next_f64() < drop_rate { 0.0 } else { v * scale })
        .collect()
}

pub fn merge_dare(
    base: &ModelWeights,
    deltas: &[DeltaSet],
    lambda: f64,
    drop_rate: f64,
    seed: u64,
) -> Result<ModelWeights, MergeError> {
    check_deltas(base, deltas)?;
    MergeParams::dare(lambda, drop_rate, seed).validate()?;
    per_tensor(base, |name, b| {
        let masked = deltas
            .iter()
            .map(|d| {
                delta_for(d, name, b).map(|t| dare_mask_scale(&t.values, drop_rate, seed, d.source_label(), name))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let views: Vec<&[f64]> = masked.iter().map(Vec::as_slice).collect();
        Ok(combine_scaled(b.values(), &views, lambda))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::merge::{compute_delta, merge_task_arithmetic};
    use crate::store::{Dtype, Tensor};

    fn single(value: f64) -> (ModelWeights, DeltaSet) {
        let base = ModelWeights::from_entries([("w", Tensor::zeros(Dtype::F32, vec![1]))]).unwrap();
        let mut d = compute_delta(&base, &base, "src").unwrap();
        d.values_mut("w").unwrap()[0] = value;
        (base, d)
    }

    #[test]
    fn zero_drop_matches_task_arithmetic() {
        let base = ModelWeights::from_entries([(
            "w",
            Tensor::new(Dtype::BF16, vec![4], vec![0.5, -1.0, 3.0, 0.0]).unwrap(),
        )])
        .unwrap();
        let model = ModelWeights::from_entries([(
            "w",
            Tensor::new(Dtype::BF16, vec![4], vec![0.75, -2.0, 3.0, 1.0]).unwrap(),
        )])
        .unwrap();
        let d = compute_delta(&model, &base, "m").unwrap();
        let ta = merge_task_arithmetic(&base, std::slice::from_ref(&d), 0.7).unwrap();
        assert_eq!(merge_dare(&base, &[d], 0.7, 0.0, 99).unwrap(), ta);
    }

    #[test]
    fn half_drop_has_two_outcomes() {
        let (base, d) = single(2.0);
        let mut seen = [false; 2];
        for seed in 0..64 {
            let v = merge_dare(&base, std::slice::from_ref(&d), 1.0, 0.5, seed).unwrap().get("w").unwrap().values()[0];
            assert!(v == 0.0 || v == 4.0, "unexpected {v}");
            seen[(v == 4.0) as usize] = true;
        }
        assert!(seen[0] && seen[1]);
    }

    #[test]
    fn mask_depends_on_label_and_name() {
        let v = vec![1.0; 256];
        let a = dare_mask_scale(&v, 0.5, 1, "a", "w");
        assert_eq!(a, dare_mask_scale(&v, 0.5, 1, "a", "w"));
        assert_ne!(a, dare_mask_scale(&v, 0.5, 1, "b", "w"));
        assert_ne!(a, dare_mask_scale(&v, 0.5, 1, "a", "w2"));
        assert_ne!(a, dare_mask_scale(&v, 0.5, 2, "a", "w"));
    }

    #[test]
    fn drop_rate_one_rejected() {
        let (base, d) = single(1.0);
        assert!(merge_dare(&base, &[d], 1.0, 1.0, 0).is_err());
    }
}
