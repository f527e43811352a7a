//! FLOPs of the language model over a fused sequence.
//!
//! Only matmul multiply-adds are counted, two FLOPs each. Per layer with
//! sequence length `L` and width `d`:
//!
//! | term              | FLOPs       | source                              |
//! |-------------------|-------------|-------------------------------------|
//! | attention_proj    | `8·L·d²`    | Q, K, V and output projections      |
//! | attention_scores  | `4·L²·d`    | `QKᵀ` and the value aggregation     |
//! | mlp               | `16·L·d²`   | `d → 4d → d`                        |
//!
//! Softmax, normalisation, embeddings and the LM head are excluded.

use std::fmt::Write;

use serde::Serialize;

use super::config::{FusionConfig, PruningKind};
use crate::util::ceil_fraction;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct LayerFlops {
    pub attention_proj: u64,
    pub attention_scores: u64,
    pub mlp: u64,
}

impl LayerFlops {
    pub fn total(&self) -> u64 {
        self.attention_proj + self.attention_scores + self.mlp
    }
}

pub fn layer_flops(len: usize, dim: usize) -> LayerFlops {
    let (l, d) = (len as u64, dim as u64);
    LayerFlops {
        attention_proj: 8 * l * d * d,
        attention_scores: 4 * l * l * d,
        mlp: 16 * l * d * d,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FlopsReport {
    pub per_layer: Vec<LayerFlops>,
    pub total: u64,
    pub effective_lengths: Vec<usize>,
}

impl FlopsReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("layer,effective_len,attention_proj,attention_scores,mlp,total\n");
        for (i, (f, len)) in self.per_layer.iter().zip(&self.effective_lengths).enumerate() {
            let _ = writeln!(
                out,
                "{i},{len},{},{},{},{}",
                f.attention_proj,
                f.attention_scores,
                f.mlp,
                f.total()
            );
        }
        let _ = writeln!(out, "total,,,,,{}", self.total);
        out
    }

    pub fn to_table(&self) -> String {
        let mut out = format!(
            "{:>5} {:>8} {:>16} {:>16} {:>16} {:>16}\n",
            "layer", "len", "attn_proj", "attn_scores", "mlp", "total"
        );
        for (i, (f, len)) in self.per_layer.iter().zip(&self.effective_lengths).enumerate() {
            let _ = writeln!(
                out,
                "{i:>5} {len:>8} {:>16} {:>16} {:>16} {:>16}",
                f.attention_proj,
                f.attention_scores,
                f.mlp,
                f.total()
            );
        }
        let _ = writeln!(out, "total FLOPs: {} ({:.3}T)", self.total, self.total as f64 / 1e12);
        out
    }
}

/// FLOPs for a fused sequence of `fused_len` tokens (vision + text) under the
/// config's pruning policy. Layer sparsity shrinks layers `≥ start_layer` to
/// `text_len + ⌈keep_ratio·V⌉` where `V = fused_len − text_len`.
pub fn estimate_flops(config: &FusionConfig, fused_len: usize) -> FlopsReport {
    let vision = fused_len.saturating_sub(config.text_len);
    let effective_lengths: Vec<usize> = (0..config.num_layers)
        .map(|layer| match config.pruning.kind {
            PruningKind::LayerSparsity { start_layer, keep_ratio } if layer >= start_layer => {
                fused_len - vision + ceil_fraction(keep_ratio, vision)
            }
            _ => fused_len,
        })
        .collect();
    let per_layer: Vec<LayerFlops> = effective_lengths.iter().map(|&l| layer_flops(l, config.model_dim)).collect();
    let total = per_layer.iter().map(LayerFlops::total).sum();
    FlopsReport {
        per_layer,
        total,
        effective_lengths,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fusion::{EncoderSpec, PruningPolicy};

    fn cfg(layers: usize, dim: usize) -> FusionConfig {
        FusionConfig {
            encoders: vec![EncoderSpec { name: "a".into(), token_len: 1, hidden_dim: dim, local_token_range: None }],
            text_len: 1,
            model_dim: dim,
            num_layers: layers,
            num_heads: 1,
            seq_cap: 4096,
            pruning: PruningPolicy::none(),
        }
    }

    #[test]
    fn small_example() {
        let r = estimate_flops(&cfg(1, 4), 2);
        assert_eq!(r.per_layer[0], LayerFlops { attention_proj: 256, attention_scores: 64, mlp: 512 });
        assert_eq!(r.total, 832);
    }

    #[test]
    fn doubling_length_quadruples_scores() {
        let a = layer_flops(10, 8);
        let b = layer_flops(20, 8);
        assert_eq!(b.attention_scores, 4 * a.attention_scores);
        assert_eq!(b.attention_proj, 2 * a.attention_proj);
    }

    #[test]
    fn superadditive() {
        let c = cfg(2, 16);
        for (a, b) in [(1, 1), (3, 50), (100, 7)] {
            assert!(estimate_flops(&c, a + b).total > estimate_flops(&c, a).total + estimate_flops(&c, b).total);
        }
    }

    #[test]
    fn layer_sparsity_schedule() {
        let mut c = cfg(5, 8);
        c.text_len = 4;
        c.pruning = PruningPolicy::layer_sparsity(2, 0.5);
        let r = estimate_flops(&c, 4 + 11);
        assert_eq!(r.effective_lengths, vec![15, 15, 10, 10, 10]);
        let sum: u64 = r.per_layer.iter().map(LayerFlops::total).sum();
        assert_eq!(sum, r.total);
    }

    #[test]
    fn csv_has_row_per_layer() {
        let r = estimate_flops(&cfg(3, 4), 2);
        let csv = r.to_csv();
        assert_eq!(csv.lines().count(), 1 + 3 + 1);
        assert!(csv.lines().nth(1).unwrap().starts_with("0,2,256,64,512,832"));
    }
}
