use std::ops::Range;

use super::config::ToyConfig;
use super::encoder::{EncoderBundle, PreprocessSpec};
use super::model::{init_base_weights, layer_key};
use super::ToyError;
use crate::merge::compute_delta;
use crate::rng::SplitMix64;
use crate::store::{Dtype, ModelWeights, Tensor};

/// Input projections of the first layer whose row-blocks carry the deltas.
pub(crate) const DELTA_TARGETS: [&str; 3] = ["attn.wq", "attn.wk", "attn.wv"];

/// Model-dimension block `[i·d/M, (i+1)·d/M)` reserved for encoder `i`.
pub fn reserved_block(i: usize, m: usize, d: usize) -> Result<Range<usize>, ToyError> {
    if m == 0 || m > d {
        return Err(ToyError::Family(format!(
            "cannot reserve {m} non-empty disjoint blocks in model_dim {d}"
        )));
    }
    if i >= m {
        return Err(ToyError::Family(format!("block {i} out of range for M = {m}")));
    }
    Ok(i * d / m..(i + 1) * d / m)
}

/// A shared base decoder plus `M` variants, each specialised to one encoder.
#[derive(Debug, Clone)]
pub struct ToyFamily {
    pub config: ToyConfig,
    pub base: ModelWeights,
    pub variants: Vec<ModelWeights>,
    pub encoders: Vec<EncoderBundle>,
}

impl ToyFamily {
    pub fn len(&self) -> usize {
        self.variants.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variants.is_empty()
    }

    pub fn block(&self, i: usize) -> Result<Range<usize>, ToyError> {
        reserved_block(i, self.variants.len(), self.config.model_dim)
    }

    /// The model carrying the changes of every listed variant, built by
    /// copying each variant's reserved rows into a copy of the base.
    pub fn assemble_reference(&self, indices: &[usize]) -> Result<ModelWeights, ToyError> {
        let d = self.config.model_dim;
        let mut out = self.base.clone();
        for &i in indices {
            let variant = self
                .variants
                .get(i)
                .ok_or_else(|| ToyError::Family(format!("no variant {i}")))?;
            let rows = self.block(i)?;
            for target in DELTA_TARGETS {
                let name = layer_key(0, target);
                let src = variant.get(&name).expect("variant layout").values().to_vec();
                let dst = out.get_mut(&name).expect("base layout");
                for r in rows.clone() {
                    for c in 0..d {
                        dst.set(r * d + c, src[r * d + c]);
                    }
                }
            }
        }
        Ok(out)
    }
}

fn uniform_tensor(shape: Vec<usize>, scale: f64, rng: &mut SplitMix64) -> Result<Tensor, ToyError> {
    let n = shape.iter().product();
    let values = (0..n).map(|_| rng.uniform(-scale, scale) as f32).collect();
    Ok(Tensor::new(Dtype::F32, shape, values)?)
}

fn build_encoder(config: &ToyConfig, i: usize, block: Range<usize>, seed: u64) -> Result<EncoderBundle, ToyError> {
    let spec = config.encoders[i];
    let (f, d) = (spec.feature_dim, config.model_dim);
    let name = format!("enc{i}");
    let mut rng = SplitMix64::for_key(seed, &["encoder", &name]);
    let enc_scale = 1.0 / (f as f64).sqrt();

    let mut proj = vec![0.0f32; f * d];
    for r in 0..f {
        for c in block.clone() {
            proj[r * d + c] = rng.uniform(-enc_scale, enc_scale) as f32;
        }
    }
    let mut proj_bias = vec![0.0f32; d];
    for c in block {
        proj_bias[c] = rng.uniform(-0.1, 0.1) as f32;
    }
    let weights = ModelWeights::from_entries([
        ("enc.weight", uniform_tensor(vec![f, f], enc_scale, &mut rng)?),
        ("enc.bias", uniform_tensor(vec![f], 0.1, &mut rng)?),
        ("proj.weight", Tensor::new(Dtype::F32, vec![f, d], proj)?),
        ("proj.bias", Tensor::new(Dtype::F32, vec![d], proj_bias)?),
    ])?;
    Ok(EncoderBundle {
        name,
        spec,
        preprocess: PreprocessSpec {
            window: (config.image_dim / (spec.token_len * f)).max(1),
            offset: i,
        },
        weights,
        model_dim: d,
        image_dim: config.image_dim,
    })
}

/// Builds a family whose variant `i` differs from the base only in the
/// reserved rows of the first layer's query/key/value projections, and whose
/// encoder `i` projects into exactly those model dimensions.
pub fn build_toy_family(config: &ToyConfig, m: usize, seed: u64) -> Result<ToyFamily, ToyError> {
    config.validate()?;
    if m == 0 {
        return Err(ToyError::Family("a family needs at least one variant".into()));
    }
    if m > config.encoders.len() {
        return Err(ToyError::Family(format!(
            "{m} variants requested but the config declares {} encoders",
            config.encoders.len()
        )));
    }
    let d = config.model_dim;
    let base = init_base_weights(config, seed)?;
    let delta_scale = 0.5 / (d as f64).sqrt();

    let mut variants = Vec::with_capacity(m);
    let mut encoders = Vec::with_capacity(m);
    for i in 0..m {
        let rows = reserved_block(i, m, d)?;
        let mut variant = base.clone();
        let mut rng = SplitMix64::for_key(seed, &["variant", &i.to_string()]);
        for target in DELTA_TARGETS {
            let t = variant.get_mut(&layer_key(0, target)).expect("base layout");
            for r in rows.clone() {
                for c in 0..d {
                    let idx = r * d + c;
                    let v = f64::from(t.values()[idx]) + rng.uniform(-delta_scale, delta_scale);
                    t.set(idx, v as f32);
                }
            }
        }
        variant.set_metadata("model", format!("toy-variant-{i}"));
        variants.push(variant);
        encoders.push(build_encoder(config, i, rows, seed)?);
    }
    check_disjoint(&base, &variants)?;
    Ok(ToyFamily {
        config: config.clone(),
        base,
        variants,
        encoders,
    })
}

fn check_disjoint(base: &ModelWeights, variants: &[ModelWeights]) -> Result<(), ToyError> {
    let deltas = variants
        .iter()
        .enumerate()
        .map(|(i, v)| compute_delta(v, base, &format!("variant:{i}")))
        .collect::<Result<Vec<_>, _>>()?;
    for (name, _) in base.iter() {
        let mut owner: Vec<Option<usize>> = vec![None; base.get(name).map_or(0, Tensor::len)];
        for (i, delta) in deltas.iter().enumerate() {
            let values = &delta.get(name).expect("same layout").values;
            for (k, &v) in values.iter().enumerate() {
                if v != 0.0 {
                    if let Some(j) = owner[k] {
                        return Err(ToyError::Family(format!(
                            "variants {j} and {i} both change {name}[{k}]"
                        )));
                    }
                    owner[k] = Some(i);
                }
            }
        }
    }
    Ok(())
}
