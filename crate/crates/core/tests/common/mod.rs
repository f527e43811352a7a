#![allow(dead_code)]

use visionfuse_core::rng::SplitMix64;
use visionfuse_core::{Dtype, ModelWeights, Tensor};

pub const DTYPES: [Dtype; 3] = [Dtype::F32, Dtype::F16, Dtype::BF16];

pub fn values(rng: &mut SplitMix64, n: usize, scale: f64) -> Vec<f32> {
    (0..n).map(|_| rng.uniform(-scale, scale) as f32).collect()
}

/// Tensor names, dtypes and shapes shared by a family.
pub fn layout(rng: &mut SplitMix64, tensors: usize, max_elems: usize) -> Vec<(String, Dtype, Vec<usize>)> {
    (0..tensors)
        .map(|i| {
            let dtype = DTYPES[rng.below(3) as usize];
            let shape = match rng.below(3) {
                0 => vec![1 + rng.below(max_elems as u64) as usize],
                1 => {
                    let r = 1 + rng.below(8) as usize;
                    vec![r, 1 + rng.below((max_elems / r).max(1) as u64) as usize]
                }
                _ => vec![],
            };
            (format!("layers.{i}.w"), dtype, shape)
        })
        .collect()
}

pub fn weights(rng: &mut SplitMix64, layout: &[(String, Dtype, Vec<usize>)], scale: f64) -> ModelWeights {
    ModelWeights::from_entries(layout.iter().map(|(name, dtype, shape)| {
        let n = shape.iter().product();
        (name.clone(), Tensor::new(*dtype, shape.clone(), values(rng, n, scale)).unwrap())
    }))
    .unwrap()
}

/// A base model and `m` fine-tuned variants with the same structure.
pub fn family(seed: u64, m: usize) -> (ModelWeights, Vec<ModelWeights>) {
    let mut rng = SplitMix64::new(seed);
    let tensors = 1 + rng.below(6) as usize;
    let lay = layout(&mut rng, tensors, 64);
    let base = weights(&mut rng, &lay, 1.0);
    let variants = (0..m)
        .map(|_| {
            let mut v = base.clone();
            for (name, _, _) in &lay {
                let t = v.get_mut(name).unwrap();
                for i in 0..t.len() {
                    let x = f64::from(t.values()[i]) + rng.uniform(-0.1, 0.1);
                    t.set(i, x as f32);
                }
            }
            v
        })
        .collect();
    (base, variants)
}

pub fn bits(w: &ModelWeights) -> Vec<(String, Vec<u32>)> {
    w.sorted_names()
        .into_iter()
        .map(|n| (n.to_string(), w.get(n).unwrap().values().iter().map(|v| v.to_bits()).collect()))
        .collect()
}
