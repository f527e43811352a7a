//! Decoder weights layout, initialisation and the instrumented forward pass.
//!
//! Projections use the `x · W` convention with `W` stored `[in, out]`, so row
//! `r` of a projection reads input dimension `r`.

use super::attention::AttentionMap;
use super::config::ToyConfig;
use super::matrix::{Matrix, OpCounter};
use super::ToyError;
use crate::rng::SplitMix64;
use crate::store::{Dtype, ModelWeights, Tensor};

const NORM_EPS: f32 = 1e-5;

pub(crate) fn layer_key(layer: usize, name: &str) -> String {
    format!("layers.{layer}.{name}")
}

/// Every decoder tensor name with its shape, in a fixed order.
pub(crate) fn layout(config: &ToyConfig) -> Vec<(String, Vec<usize>)> {
    let d = config.model_dim;
    let mut out = vec![
        ("embed.tokens".to_string(), vec![config.vocab_size, d]),
        ("embed.positions".to_string(), vec![config.max_seq, d]),
    ];
    for l in 0..config.num_layers {
        out.push((layer_key(l, "attn_norm.weight"), vec![d]));
        for p in ["wq", "wk", "wv", "wo"] {
            out.push((layer_key(l, &format!("attn.{p}")), vec![d, d]));
        }
        out.push((layer_key(l, "mlp_norm.weight"), vec![d]));
        out.push((layer_key(l, "mlp.w_in"), vec![d, 4 * d]));
        out.push((layer_key(l, "mlp.w_out"), vec![4 * d, d]));
    }
    out.push(("final_norm.weight".to_string(), vec![d]));
    out.push(("lm_head".to_string(), vec![d, config.vocab_size]));
    out
}

/// Base decoder weights: uniform in `±1/√fan_in` (`±0.5` for embeddings),
/// norm gains 1. Each tensor
/// draws from its own stream keyed by `(seed, name)`.
pub fn init_base_weights(config: &ToyConfig, seed: u64) -> Result<ModelWeights, ToyError> {
    config.validate()?;
    let mut w = ModelWeights::new();
    for (name, shape) in layout(config) {
        let n: usize = shape.iter().product();
        let values = if name.ends_with("norm.weight") {
            vec![1.0; n]
        } else {
            let scale = if name.starts_with("embed.") { 0.5 } else { 1.0 / (shape[0] as f64).sqrt() };
            let mut rng = SplitMix64::for_key(seed, &["decoder", &name]);
            (0..n).map(|_| rng.uniform(-scale, scale) as f32).collect()
        };
        w.insert(name, Tensor::new(Dtype::F32, shape, values)?)?;
    }
    w.set_metadata("model", "toy-decoder");
    Ok(w)
}

struct Weights<'a> {
    w: &'a ModelWeights,
}

impl<'a> Weights<'a> {
    fn get(&self, name: &str) -> &'a [f32] {
        self.w.get(name).expect("layout checked").values()
    }
}

fn check_layout(weights: &ModelWeights, config: &ToyConfig) -> Result<(), ToyError> {
    for (name, shape) in layout(config) {
        match weights.get(&name) {
            None => return Err(ToyError::Shape(format!("weights lack {name}"))),
            Some(t) if t.shape() != shape.as_slice() => {
                return Err(ToyError::Shape(format!(
                    "{name} has shape {:?}, config expects {shape:?}",
                    t.shape()
                )))
            }
            Some(_) => {}
        }
    }
    Ok(())
}

fn rms_norm(x: &Matrix, gain: &[f32]) -> Matrix {
    let mut out = x.clone();
    for r in 0..x.rows {
        let row = out.row_mut(r);
        let ms = row.iter().map(|v| v * v).sum::<f32>() / row.len() as f32;
        let inv = 1.0 / (ms + NORM_EPS).sqrt();
        row.iter_mut().zip(gain).for_each(|(v, g)| *v = *v * inv * g);
    }
    out
}

fn gelu(x: f32) -> f32 {
    const C: f32 = 0.797_884_6; // sqrt(2/pi)
    0.5 * x * (1.0 + (C * (x + 0.044_715 * x * x * x)).tanh())
}

#[derive(Debug, Clone)]
pub struct ForwardOutput {
    /// `[text_len × vocab_size]` next-token logits.
    pub logits: Matrix,
    pub attention: AttentionMap,
    /// Full causal attention probabilities, `[layer][head]` of `L × L`.
    pub full_attention: Vec<Vec<Matrix>>,
    pub counter: OpCounter,
    pub vision_len: usize,
}

impl ForwardOutput {
    /// Greedy next token at every text position (ties pick the lower id).
    pub fn greedy(&self) -> Vec<u32> {
        (0..self.logits.rows)
            .map(|r| {
                let row = self.logits.row(r);
                let mut best = 0;
                for (i, &v) in row.iter().enumerate() {
                    if v > row[best] {
                        best = i;
                    }
                }
                best as u32
            })
            .collect()
    }
}

/// Runs the decoder over `[vision; text]` with a causal mask.
///
/// Every score is computed (masked entries included) so the multiply-add
/// count is exactly `2·L²·d` for the score and value products per layer.
pub fn forward(
    weights: &ModelWeights,
    config: &ToyConfig,
    vision: &Matrix,
    text: &[u32],
) -> Result<ForwardOutput, ToyError> {
    config.validate()?;
    check_layout(weights, config)?;
    let d = config.model_dim;
    if vision.cols != d && vision.rows > 0 {
        return Err(ToyError::Shape(format!("vision tokens have width {}, model_dim is {d}", vision.cols)));
    }
    let v_len = vision.rows;
    let t_len = text.len();
    let len = v_len + t_len;
    if len > config.max_seq {
        return Err(ToyError::Shape(format!("sequence of {len} exceeds max_seq {}", config.max_seq)));
    }
    if let Some(&bad) = text.iter().find(|&&t| t as usize >= config.vocab_size) {
        return Err(ToyError::Shape(format!("token id {bad} outside vocab of {}", config.vocab_size)));
    }

    let w = Weights { w: weights };
    let mut counter = OpCounter::default();

    let embed = w.get("embed.tokens");
    let mut x = Matrix::zeros(len, d);
    if v_len > 0 {
        x.data[..v_len * d].copy_from_slice(&vision.data);
    }
    for (i, &tok) in text.iter().enumerate() {
        let t = tok as usize;
        x.row_mut(v_len + i).copy_from_slice(&embed[t * d..(t + 1) * d]);
    }
    if config.use_positions {
        let pos = w.get("embed.positions");
        x.data.iter_mut().zip(&pos[..len * d]).for_each(|(a, p)| *a += p);
    }

    let heads = config.num_heads;
    let hd = config.head_dim();
    let scale = 1.0 / (hd as f32).sqrt();
    let mut full_attention = Vec::with_capacity(config.num_layers);

    for l in 0..config.num_layers {
        let h = rms_norm(&x, w.get(&layer_key(l, "attn_norm.weight")));
        let q = h.matmul(w.get(&layer_key(l, "attn.wq")), d, &mut counter.attention_proj_macs);
        let k = h.matmul(w.get(&layer_key(l, "attn.wk")), d, &mut counter.attention_proj_macs);
        let v = h.matmul(w.get(&layer_key(l, "attn.wv")), d, &mut counter.attention_proj_macs);

        let mut mixed = Matrix::zeros(len, d);
        let mut layer_probs = Vec::with_capacity(heads);
        for head in 0..heads {
            let c0 = head * hd;
            let mut probs = Matrix::zeros(len, len);
            for i in 0..len {
                let qi = &q.row(i)[c0..c0 + hd];
                let row = probs.row_mut(i);
                for (j, s) in row.iter_mut().enumerate() {
                    let kj = &k.row(j)[c0..c0 + hd];
                    *s = qi.iter().zip(kj).map(|(a, b)| a * b).sum::<f32>() * scale;
                }
                // causal softmax, normalised in f64
                let max = row[..=i].iter().copied().fold(f32::NEG_INFINITY, f32::max);
                let mut total = 0.0f64;
                for (j, s) in row.iter_mut().enumerate() {
                    if j <= i {
                        let e = f64::from(*s - max).exp();
                        total += e;
                        *s = e as f32;
                    } else {
                        *s = 0.0;
                    }
                }
                for s in row[..=i].iter_mut() {
                    *s = (f64::from(*s) / total) as f32;
                }
            }
            counter.attention_scores_macs += (len * len * hd) as u64;
            for i in 0..len {
                let out = &mut mixed.row_mut(i)[c0..c0 + hd];
                for j in 0..len {
                    let p = probs.get(i, j);
                    let vj = &v.row(j)[c0..c0 + hd];
                    out.iter_mut().zip(vj).for_each(|(o, &vv)| *o += p * vv);
                }
            }
            counter.attention_scores_macs += (len * len * hd) as u64;
            layer_probs.push(probs);
        }
        let attn = mixed.matmul(w.get(&layer_key(l, "attn.wo")), d, &mut counter.attention_proj_macs);
        x += &attn;

        let h = rms_norm(&x, w.get(&layer_key(l, "mlp_norm.weight")));
        let mut inner = h.matmul(w.get(&layer_key(l, "mlp.w_in")), 4 * d, &mut counter.mlp_macs);
        inner.data.iter_mut().for_each(|v| *v = gelu(*v));
        let out = inner.matmul(w.get(&layer_key(l, "mlp.w_out")), d, &mut counter.mlp_macs);
        x += &out;
        full_attention.push(layer_probs);
    }

    let text_hidden = rms_norm(&x.rows_range(v_len, len), w.get("final_norm.weight"));
    let logits = text_hidden.matmul(w.get("lm_head"), config.vocab_size, &mut counter.head_macs);

    let slices = full_attention
        .iter()
        .map(|heads| heads.iter().map(|p| p.block(v_len, len, 0, v_len)).collect())
        .collect();
    let attention = AttentionMap::new(slices)?;
    Ok(ForwardOutput {
        logits,
        attention,
        full_attention,
        counter,
        vision_len: v_len,
    })
}
