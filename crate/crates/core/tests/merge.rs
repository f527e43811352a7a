mod common;

use common::{bits, family};
use proptest::prelude::*;
use visionfuse_core::merge::{
    compute_delta, dare_mask_scale, grid_search, grid_search_par, interpolate_two, merge_average, merge_deltas,
    merge_slerp, merge_task_arithmetic, slerp_vectors, ties_combine, trim_top_k, DeltaSet, MergeError, MergeGrid,
    MergeMethod, MergeParams,
};
use visionfuse_core::{Dtype, ModelWeights, Tensor};

fn deltas(base: &ModelWeights, variants: &[ModelWeights]) -> Vec<DeltaSet> {
    variants
        .iter()
        .enumerate()
        .map(|(i, v)| compute_delta(v, base, &format!("m{i}")).unwrap())
        .collect()
}

fn vector(v: &[f32]) -> ModelWeights {
    ModelWeights::from_entries([("w", Tensor::new(Dtype::F32, vec![v.len()], v.to_vec()).unwrap())]).unwrap()
}

#[test]
fn task_arithmetic_two_source_example() {
    let base = vector(&[1.0, 1.0]);
    let ds = deltas(&base, &[vector(&[3.0, 1.0]), vector(&[1.0, 5.0])]);
    let m = merge_task_arithmetic(&base, &ds, 0.5).unwrap();
    assert_eq!(m.get("w").unwrap().values(), &[2.0, 3.0]);
}

#[test]
fn ties_worked_example() {
    // Trim to the top 50% by magnitude, elect sign by sum, average agreeing.
    let t1 = trim_top_k(&[0.5, -0.1, 0.3, 0.0], 0.5);
    let t2 = trim_top_k(&[-0.2, 0.4, 0.1, 0.6], 0.5);
    assert_eq!(t1, vec![0.5, 0.0, 0.3, 0.0]);
    assert_eq!(t2, vec![0.0, 0.4, 0.0, 0.6]);
    assert_eq!(ties_combine(&[t1, t2]), vec![0.5, 0.4, 0.3, 0.6]);
    assert_eq!(ties_combine(&[vec![1.0, -2.0], vec![-3.0, 2.0]]), vec![-3.0, 0.0]);
}

#[test]
fn dare_p_zero_is_identity_on_values() {
    let v = [0.25, -1.5, 3.0];
    assert_eq!(dare_mask_scale(&v, 0.0, 42, "a", "w"), v.to_vec());
}

#[test]
fn dare_streams_are_keyed_by_label_and_tensor() {
    let v = vec![1.0; 256];
    let a = dare_mask_scale(&v, 0.5, 1, "a", "w");
    assert_eq!(a, dare_mask_scale(&v, 0.5, 1, "a", "w"));
    assert_ne!(a, dare_mask_scale(&v, 0.5, 1, "b", "w"));
    assert_ne!(a, dare_mask_scale(&v, 0.5, 1, "a", "x"));
    assert_ne!(a, dare_mask_scale(&v, 0.5, 2, "a", "w"));
    assert!(a.iter().all(|&x| x == 0.0 || x == 2.0));
}

#[test]
fn slerp_orthogonal_midpoint() {
    let m = slerp_vectors(&[1.0, 0.0], &[0.0, 1.0], 0.5);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    assert!((m[0] - h).abs() < 1e-12 && (m[1] - h).abs() < 1e-12);
    // Parallel inputs fall back to linear interpolation.
    assert_eq!(slerp_vectors(&[1.0, 2.0], &[2.0, 4.0], 0.5), vec![1.5, 3.0]);
    assert_eq!(slerp_vectors(&[0.0, 0.0], &[2.0, 4.0], 0.25), vec![0.5, 1.0]);
}

#[test]
fn delta_checkpoint_round_trip_and_base_check() {
    let (base, vs) = family(3, 2);
    let d = compute_delta(&vs[0], &base, "m0").unwrap();
    let w = d.to_weights().unwrap();
    let back = DeltaSet::from_weights(&w).unwrap();
    assert_eq!(back.base_fingerprint(), base.fingerprint());
    assert_eq!(back.source_label(), "m0");

    let (other_base, _) = family(4, 0);
    let err = merge_task_arithmetic(&other_base, &[d], 1.0).unwrap_err();
    assert!(matches!(err, MergeError::BaseMismatch { .. } | MergeError::Incompatible(_)), "{err}");

    let mut bare = w.clone();
    bare.metadata_mut().clear();
    assert!(matches!(DeltaSet::from_weights(&bare), Err(MergeError::MissingMetadata(_))));
}

#[test]
fn incompatible_sources_rejected() {
    let base = vector(&[1.0, 2.0]);
    let other = vector(&[1.0, 2.0, 3.0]);
    let err = compute_delta(&other, &base, "x").unwrap_err();
    assert!(matches!(err, MergeError::Incompatible(_)));
    assert!(err.to_string().contains("w"));
}

#[test]
fn source_count_and_parameter_ranges() {
    let (base, vs) = family(5, 3);
    let ds = deltas(&base, &vs);
    assert!(matches!(
        merge_deltas(&base, &ds, &MergeParams::interpolate2(0.5)),
        Err(MergeError::SourceCount { expected: 2, got: 3, .. })
    ));
    assert!(matches!(merge_deltas(&base, &[], &MergeParams::task_arithmetic(1.0)), Err(MergeError::NoSources)));
    for bad in [MergeParams::ties(1.0, 0.0), MergeParams::dare(1.0, 1.0, 0), MergeParams::interpolate2(1.5)] {
        assert!(matches!(merge_deltas(&base, &ds[..2], &bad), Err(MergeError::Parameter { .. })), "{bad}");
    }
}

#[test]
fn parallel_grid_ranks_like_sequential() {
    let (base, vs) = family(6, 2);
    let ds = deltas(&base, &vs);
    let target = merge_task_arithmetic(&base, &ds, 0.5).unwrap();
    let score = |m: &ModelWeights| -> Result<f64, String> {
        let mut s = 0.0;
        for (n, t) in m.iter() {
            for (a, b) in t.values().iter().zip(target.get(n).unwrap().values()) {
                s -= (f64::from(*a) - f64::from(*b)).abs();
            }
        }
        Ok(s)
    };
    let grid = MergeGrid::searched_ranges(MergeMethod::Ties);
    let template = MergeParams::new(MergeMethod::Ties);
    let a = grid_search(&base, &ds, &grid, &template, score).unwrap();
    let b = grid_search_par(&base, &ds, &grid, &template, score).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.len(), 18);
    assert!(a.windows(2).all(|w| w[0].score >= w[1].score));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn average_ignores_input_order(seed in any::<u64>(), m in 2usize..5) {
        let (_, vs) = family(seed, m);
        let fwd: Vec<&ModelWeights> = vs.iter().collect();
        let rev: Vec<&ModelWeights> = vs.iter().rev().collect();
        prop_assert_eq!(bits(&merge_average(&fwd).unwrap()), bits(&merge_average(&rev).unwrap()));
    }

    #[test]
    fn two_source_task_arithmetic_commutes(seed in any::<u64>(), lambda in 0.0f64..1.5) {
        let (base, vs) = family(seed, 2);
        let ds = deltas(&base, &vs);
        let swapped = vec![ds[1].clone(), ds[0].clone()];
        prop_assert_eq!(
            bits(&merge_task_arithmetic(&base, &ds, lambda).unwrap()),
            bits(&merge_task_arithmetic(&base, &swapped, lambda).unwrap())
        );
    }

    #[test]
    fn interpolation_mirrors(seed in any::<u64>(), alpha in 0.0f64..=1.0) {
        let (base, vs) = family(seed, 2);
        let ds = deltas(&base, &vs);
        let a = interpolate_two(&base, &ds[0], &ds[1], alpha).unwrap();
        let b = interpolate_two(&base, &ds[1], &ds[0], 1.0 - alpha).unwrap();
        for (n, t) in a.iter() {
            for (x, y) in t.values().iter().zip(b.get(n).unwrap().values()) {
                prop_assert!((x - y).abs() <= 1e-2 * (1.0 + x.abs()), "{n}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn ties_output_lies_between_agreeing_values(values in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 6), 1..5), r in 0.1f64..=1.0) {
        let trimmed: Vec<Vec<f64>> = values.iter().map(|v| trim_top_k(v, r)).collect();
        let out = ties_combine(&trimmed);
        for (i, &o) in out.iter().enumerate() {
            if o != 0.0 {
                let agreeing: Vec<f64> = trimmed.iter().map(|t| t[i]).filter(|v| v.signum() == o.signum() && *v != 0.0).collect();
                let lo = agreeing.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = agreeing.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(o >= lo - 1e-12 && o <= hi + 1e-12);
            }
        }
    }

    #[test]
    fn slerp_endpoints_recover_sources(seed in any::<u64>()) {
        let (base, vs) = family(seed, 2);
        let ds = deltas(&base, &vs);
        prop_assert_eq!(bits(&merge_slerp(&base, &ds[0], &ds[1], 0.0).unwrap()), bits(&vs[0]));
        prop_assert_eq!(bits(&merge_slerp(&base, &ds[0], &ds[1], 1.0).unwrap()), bits(&vs[1]));
    }
}
