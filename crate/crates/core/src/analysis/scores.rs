use std::fmt::Write;

use super::AnalysisError;
use crate::toy::AttentionMap;

/// One attention score per vision token, tagged with the model it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenScoreVector {
    scores: Vec<f64>,
    source: String,
}

impl TokenScoreVector {
    pub fn new(scores: Vec<f64>, source: impl Into<String>) -> Result<Self, AnalysisError> {
        if scores.is_empty() {
            return Err(AnalysisError::Empty("score vector"));
        }
        if let Some(index) = scores.iter().position(|s| !s.is_finite()) {
            return Err(AnalysisError::NonFinite { index });
        }
        Ok(Self {
            scores,
            source: source.into(),
        })
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// `index,score` rows with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,score\n");
        for (i, s) in self.scores.iter().enumerate() {
            writeln!(out, "{i},{s}").expect("write to string");
        }
        out
    }
}

/// Mean attention each vision token receives over every layer, head and
/// text position.
pub fn average_attention(map: &AttentionMap, source: impl Into<String>) -> Result<TokenScoreVector, AnalysisError> {
    let (rows, cols) = (map.text_len(), map.vision_len());
    if rows == 0 || cols == 0 {
        return Err(AnalysisError::Empty("attention map"));
    }
    let mut sums = vec![0.0f64; cols];
    let mut count = 0usize;
    for m in map.per_layer.iter().flatten() {
        for r in 0..m.rows {
            sums.iter_mut().zip(m.row(r)).for_each(|(s, &v)| *s += f64::from(v));
        }
        count += m.rows;
    }
    sums.iter_mut().for_each(|s| *s /= count as f64);
    TokenScoreVector::new(sums, source)
}
