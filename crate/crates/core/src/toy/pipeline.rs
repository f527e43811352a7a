use serde::Serialize;

use super::attention::AttentionMap;
use super::encoder::encode_image;
use super::family::ToyFamily;
use super::matrix::{Matrix, OpCounter};
use super::model::forward;
use super::ToyError;
use crate::fusion::{estimate_flops, FlopsReport, TokenSequence};
use crate::merge::{compute_delta, merge_deltas, MergeRecipe};
use crate::store::ModelWeights;

/// Recipe model reference naming the family base; variants are `variant:<i>`.
pub const BASE_REF: &str = "base";

/// Which family member a recipe reference names: `None` for the base,
/// `Some(i)` for variant `i`.
pub fn resolve_ref(family: &ToyFamily, reference: &str) -> Result<Option<usize>, ToyError> {
    if reference == BASE_REF {
        return Ok(None);
    }
    let idx = reference
        .strip_prefix("variant:")
        .and_then(|s| s.parse::<usize>().ok())
        .ok_or_else(|| ToyError::Family(format!("unknown model reference {reference:?}")))?;
    if idx >= family.len() {
        return Err(ToyError::Family(format!(
            "{reference} out of range: family has {} variants",
            family.len()
        )));
    }
    Ok(Some(idx))
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    /// Greedy next token at each text position.
    pub prediction: Vec<u32>,
    pub logits: Matrix,
    pub attention: AttentionMap,
    pub sequence: TokenSequence,
    pub merged: ModelWeights,
    pub estimated: FlopsReport,
    pub counter: OpCounter,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlopsComparison {
    pub measured: u64,
    pub estimated: u64,
    pub relative_error: f64,
}

impl PipelineOutput {
    pub fn flops_comparison(&self) -> FlopsComparison {
        let measured = self.counter.layer_flops();
        let estimated = self.estimated.total;
        let relative_error = if estimated == 0 {
            0.0
        } else {
            (measured as f64 - estimated as f64).abs() / estimated as f64
        };
        FlopsComparison {
            measured,
            estimated,
            relative_error,
        }
    }
}

/// Merge the recipe's sources, encode the image with each source's encoder
/// (in recipe order), concatenate the vision tokens and run the decoder.
pub fn run_pipeline(
    family: &ToyFamily,
    recipe: &MergeRecipe,
    image: &[f32],
    text: &[u32],
) -> Result<PipelineOutput, ToyError> {
    recipe.validate()?;
    if resolve_ref(family, &recipe.base)?.is_some() {
        return Err(ToyError::Family(format!("recipe base must be {BASE_REF:?}")));
    }
    let mut indices = Vec::with_capacity(recipe.sources.len());
    for source in &recipe.sources {
        match resolve_ref(family, &source.model)? {
            Some(i) => indices.push(i),
            None => return Err(ToyError::Family("the base cannot be a merge source".into())),
        }
    }
    let deltas = recipe
        .sources
        .iter()
        .zip(&indices)
        .map(|(s, &i)| compute_delta(&family.variants[i], &family.base, &s.label))
        .collect::<Result<Vec<_>, _>>()?;
    let merged = merge_deltas(&family.base, &deltas, &recipe.params())?;

    let tokens = indices
        .iter()
        .map(|&i| encode_image(&family.encoders[i], image))
        .collect::<Result<Vec<_>, _>>()?;
    let vision = Matrix::vstack(&tokens.iter().collect::<Vec<_>>());
    let fusion = family.config.fusion_config(&indices, text.len());
    let sequence = fusion.fused_sequence();

    let out = forward(&merged, &family.config, &vision, text)?;
    let estimated = estimate_flops(&fusion, sequence.total_len);
    Ok(PipelineOutput {
        prediction: out.greedy(),
        logits: out.logits,
        attention: out.attention,
        sequence,
        merged,
        estimated,
        counter: out.counter,
    })
}
