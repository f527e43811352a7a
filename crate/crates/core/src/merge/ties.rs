//! TIES merging: trim each delta to its largest-magnitude entries, elect a
//! per-element sign, then average only the entries that agree with it.
//! Trimming is per tensor.

use super::methods::{check_deltas, delta_for, per_tensor};
use super::{DeltaSet, MergeError, MergeParams};
use crate::store::ModelWeights;

/// Number of entries kept out of `n` for `retain_ratio`: `⌈r·n⌉`, at least 1.
pub(crate) fn retain_count(retain_ratio: f64, n: usize) -> usize {
    if n == 0 {
        return 0;
    }
    crate::util::ceil_fraction(retain_ratio, n).max(1)
}

/// Zeroes all but the `⌈r·n⌉` largest |values|; equal magnitudes keep the
/// lower flat index.
pub fn trim_top_k(values: &[f64], retain_ratio: f64) -> Vec<f64> {
    let k = retain_count(retain_ratio, values.len());
    let mut out = vec![0.0; values.len()];
    if k == 0 {
        return out;
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    let by_magnitude = |&a: &usize, &b: &usize| values[b].abs().total_cmp(&values[a].abs()).then(a.cmp(&b));
    if k < order.len() {
        order.select_nth_unstable_by(k - 1, by_magnitude);
    }
    for &i in &order[..k] {
        out[i] = values[i];
    }
    out
}

fn sign(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

/// Elect + disjoint mean over already-trimmed deltas. Element `i` of the
/// result is the mean of the trimmed values whose sign matches the sign of
/// their sum; 0 when the sum is 0 or nothing matches.
pub fn ties_combine(trimmed: &[Vec<f64>]) -> Vec<f64> {
    let n = trimmed.first().map_or(0, Vec::len);
    (0..n)
        .map(|i| {
            let total: f64 = trimmed.iter().map(|t| t[i]).sum();
            let elected = sign(total);
            if elected == 0 {
                return 0.0;
            }
            let (sum, count) = trimmed
                .iter()
                .map(|t| t[i])
                .filter(|&v| sign(v) == elected)
                .fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
            if count == 0 {
                0.0
            } else {
                sum / count as f64
            }
        })
        .collect()
}

pub fn merge_ties(
    base: &ModelWeights,
    deltas: &[DeltaSet],
    lambda: f64,
    retain_ratio: f64,
) -> Result<ModelWeights, MergeError> {
    check_deltas(base, deltas)?;
    MergeParams::ties(lambda, retain_ratio).validate()?;
    per_tensor(base, |name, b| {
        let trimmed = deltas
            .iter()
            .map(|d| delta_for(d, name, b).map(|t| trim_top_k(&t.values, retain_ratio)))
            .collect::<Result<Vec<_>, _>>()?;
        let merged = ties_combine(&trimmed);
        Ok(b.values()
            .iter()
            .zip(merged)
            .map(|(&bv, m)| f64::from(bv) + lambda * m)
            .collect())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::merge::compute_delta;
    use crate::store::{Dtype, Tensor};

    fn setup(d1: &[f64], d2: &[f64]) -> (ModelWeights, Vec<DeltaSet>) {
        let base =
            ModelWeights::from_entries([("w", Tensor::zeros(Dtype::F32, vec![d1.len()]))]).unwrap();
        let mut a = compute_delta(&base, &base, "a").unwrap();
        a.values_mut("w").unwrap().copy_from_slice(d1);
        let mut b = compute_delta(&base, &base, "b").unwrap();
        b.values_mut("w").unwrap().copy_from_slice(d2);
        (base, vec![a, b])
    }

    #[test]
    fn full_retain_example() {
        let (base, ds) = setup(&[3.0, -1.0], &[-2.0, 0.5]);
        let m = merge_ties(&base, &ds, 1.0, 1.0).unwrap();
        assert_eq!(m.get("w").unwrap().values(), &[3.0, -1.0]);
    }

    #[test]
    fn half_retain_example() {
        let (base, ds) = setup(&[3.0, -1.0], &[-2.0, 0.5]);
        assert_eq!(trim_top_k(&[3.0, -1.0], 0.5), vec![3.0, 0.0]);
        assert_eq!(trim_top_k(&[-2.0, 0.5], 0.5), vec![-2.0, 0.0]);
        let m = merge_ties(&base, &ds, 1.0, 0.5).unwrap();
        assert_eq!(m.get("w").unwrap().values(), &[3.0, 0.0]);
    }

    #[test]
    fn single_delta_full_retain_is_task_arithmetic() {
        let base = ModelWeights::from_entries([(
            "w",
            Tensor::new(Dtype::F32, vec![3], vec![0.5, -1.0, 2.0]).unwrap(),
        )])
        .unwrap();
        let model = ModelWeights::from_entries([(
            "w",
            Tensor::new(Dtype::F32, vec![3], vec![0.25, 1.0, 2.0]).unwrap(),
        )])
        .unwrap();
        let d = compute_delta(&model, &base, "m").unwrap();
        assert_eq!(merge_ties(&base, &[d], 1.0, 1.0).unwrap(), model);
    }

    #[test]
    fn magnitude_ties_keep_lower_index() {
        assert_eq!(trim_top_k(&[1.0, -1.0, 1.0, 0.5], 0.5), vec![1.0, -1.0, 0.0, 0.0]);
        assert_eq!(trim_top_k(&[2.0, 2.0, 2.0], 0.1), vec![2.0, 0.0, 0.0]);
    }

    #[test]
    fn retain_count_is_ceiling() {
        assert_eq!(retain_count(0.3, 10), 3);
        assert_eq!(retain_count(0.1, 10), 1);
        assert_eq!(retain_count(0.25, 10), 3);
        assert_eq!(retain_count(0.1, 1), 1);
        assert_eq!(retain_count(1.0, 7), 7);
    }

    #[test]
    fn zero_consensus_gives_zero() {
        assert_eq!(ties_combine(&[vec![1.0], vec![-1.0]]), vec![0.0]);
        assert_eq!(ties_combine(&[vec![0.0], vec![0.0]]), vec![0.0]);
    }

    #[test]
    fn invalid_ratio_rejected() {
        let (base, ds) = setup(&[1.0], &[1.0]);
        assert!(merge_ties(&base, &ds, 1.0, 0.0).is_err());
        assert!(merge_ties(&base, &ds, 1.0, 1.5).is_err());
    }
}
