//! Fixtures shared by the benchmarks under `benches/`.

use visionfuse_core::merge::{compute_delta, DeltaSet};
use visionfuse_core::rng::SplitMix64;
use visionfuse_core::{Dtype, ModelWeights, Tensor};

/// A base with `tensors` F32 tensors of `elems` values and `m` variants.
pub fn synthetic_family(tensors: usize, elems: usize, m: usize, seed: u64) -> (ModelWeights, Vec<DeltaSet>) {
    let mut rng = SplitMix64::new(seed);
    let mut draw = |n: usize, scale: f64| -> Vec<f32> { (0..n).map(|_| rng.uniform(-scale, scale) as f32).collect() };
    let base = ModelWeights::from_entries(
        (0..tensors).map(|i| (format!("layers.{i}.weight"), Tensor::new(Dtype::F32, vec![elems], draw(elems, 1.0)).unwrap())),
    )
    .unwrap();
    let deltas = (0..m)
        .map(|j| {
            let variant = ModelWeights::from_entries(base.iter().map(|(name, t)| {
                let v: Vec<f32> = t.values().iter().zip(draw(elems, 0.05)).map(|(a, b)| a + b).collect();
                (name.to_string(), Tensor::new(Dtype::F32, vec![elems], v).unwrap())
            }))
            .unwrap();
            compute_delta(&variant, &base, &format!("m{j}")).unwrap()
        })
        .collect();
    (base, deltas)
}
