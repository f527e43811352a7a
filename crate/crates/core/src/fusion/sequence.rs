use std::fmt;

use serde::{Deserialize, Serialize};

use super::config::{DropScope, EncoderSpec, PruningKind, PruningPolicy};
use super::FusionError;
use crate::rng::SplitMix64;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentSource {
    Vision(String),
    Text,
}

impl SegmentSource {
    pub const TEXT: &'static str = "text";

    pub fn name(&self) -> &str {
        match self {
            SegmentSource::Vision(n) => n,
            SegmentSource::Text => Self::TEXT,
        }
    }

    pub fn is_text(&self) -> bool {
        matches!(self, SegmentSource::Text)
    }
}

impl fmt::Display for SegmentSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A run of tokens from one source. `indices` are the original token indices
/// still present, strictly increasing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub source: SegmentSource,
    pub indices: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub local_range: Option<[usize; 2]>,
}

impl Segment {
    pub fn full(encoder: &EncoderSpec) -> Self {
        Self {
            source: SegmentSource::Vision(encoder.name.clone()),
            indices: (0..encoder.token_len).collect(),
            local_range: encoder.local_token_range,
        }
    }

    pub fn vision(name: impl Into<String>, len: usize) -> Self {
        Self {
            source: SegmentSource::Vision(name.into()),
            indices: (0..len).collect(),
            local_range: None,
        }
    }

    pub fn text(len: usize) -> Self {
        Self {
            source: SegmentSource::Text,
            indices: (0..len).collect(),
            local_range: None,
        }
    }

    pub fn with_local_range(mut self, start: usize, end: usize) -> Self {
        self.local_range = Some([start, end]);
        self
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    fn is_local(&self, index: usize) -> bool {
        self.local_range.is_some_and(|[s, e]| (s..e).contains(&index))
    }
}

/// The fused LLM input `[V₁; …; V_M; text]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    pub segments: Vec<Segment>,
    pub total_len: usize,
}

impl TokenSequence {
    pub fn new(segments: Vec<Segment>) -> Self {
        let total_len = segments.iter().map(Segment::len).sum();
        Self { segments, total_len }
    }

    pub fn vision_len(&self) -> usize {
        self.segments.iter().filter(|s| !s.source.is_text()).map(Segment::len).sum()
    }

    pub fn text_len(&self) -> usize {
        self.segments.iter().filter(|s| s.source.is_text()).map(Segment::len).sum()
    }

    pub fn segment(&self, source: &str) -> Option<&Segment> {
        self.segments.iter().find(|s| s.source.name() == source)
    }

    /// Sequence positions `[start, end)` occupied by each segment.
    pub fn spans(&self) -> Vec<(SegmentSource, usize, usize)> {
        let mut at = 0;
        self.segments
            .iter()
            .map(|s| {
                let span = (s.source.clone(), at, at + s.len());
                at += s.len();
                span
            })
            .collect()
    }
}

/// Concatenates vision segments in the given order and appends `text_len`
/// text tokens. Empty vision segments are kept so the roster is visible.
pub fn concat_tokens(vision_segments: Vec<Segment>, text_len: usize) -> TokenSequence {
    let mut segments = vision_segments;
    segments.push(Segment::text(text_len));
    TokenSequence::new(segments)
}

/// Applies a pruning policy. Only vision tokens are ever removed and the
/// survivors keep their relative order.
pub fn apply_pruning(seq: &TokenSequence, policy: &PruningPolicy) -> Result<TokenSequence, FusionError> {
    let (n, scope) = match policy.kind {
        PruningKind::None | PruningKind::LayerSparsity { .. } => return Ok(seq.clone()),
        PruningKind::RandomDrop { n, scope } => (n, scope),
    };
    if scope == DropScope::LocalOnly
        && !seq.segments.iter().any(|s| !s.source.is_text() && s.local_range.is_some())
    {
        return Err(FusionError::NoLocalRange);
    }

    // Every eligible token gets a key from its segment's stream; the n
    // smallest keys are dropped, which is a uniform n-subset.
    let mut keyed: Vec<(u64, usize, usize)> = Vec::new();
    for (si, seg) in seq.segments.iter().enumerate() {
        if seg.source.is_text() {
            continue;
        }
        let mut rng = SplitMix64::for_key(policy.seed, &[seg.source.name()]);
        for (pos, &index) in seg.indices.iter().enumerate() {
            let key = rng.next_u64();
            if scope == DropScope::All || seg.is_local(index) {
                keyed.push((key, si, pos));
            }
        }
    }
    if n > keyed.len() {
        return Err(FusionError::DropExceedsEligible { n, eligible: keyed.len() });
    }
    keyed.sort_unstable();
    let mut dropped: Vec<Vec<bool>> = seq.segments.iter().map(|s| vec![false; s.len()]).collect();
    for &(_, si, pos) in &keyed[..n] {
        dropped[si][pos] = true;
    }
    let segments = seq
        .segments
        .iter()
        .zip(&dropped)
        .map(|(seg, drop)| Segment {
            indices: seg.indices.iter().zip(drop).filter(|(_, &d)| !d).map(|(&i, _)| i).collect(),
            ..seg.clone()
        })
        .collect();
    Ok(TokenSequence::new(segments))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn concat_adds_lengths_in_order() {
        let seq = concat_tokens(vec![Segment::vision("enc1", 2), Segment::vision("enc2", 3)], 4);
        assert_eq!(seq.total_len, 9);
        let order: Vec<&str> = seq.segments.iter().map(|s| s.source.name()).collect();
        assert_eq!(order, vec!["enc1", "enc2", "text"]);
        assert_eq!(seq.spans()[1], (SegmentSource::Vision("enc2".into()), 2, 5));
    }

    #[test]
    fn single_encoder_without_text() {
        let seq = concat_tokens(vec![Segment::vision("enc", 5)], 0);
        assert_eq!(seq.total_len, 5);
        assert_eq!(seq.segments[0], Segment::vision("enc", 5));
    }

    #[test]
    fn no_encoders_is_text_only() {
        let seq = concat_tokens(vec![], 6);
        assert_eq!(seq.segments, vec![Segment::text(6)]);
        assert_eq!(seq.vision_len(), 0);
    }

    #[test]
    fn drop_zero_is_identity() {
        let seq = concat_tokens(vec![Segment::vision("a", 4)], 2);
        assert_eq!(apply_pruning(&seq, &PruningPolicy::random_drop(0, DropScope::All, 3)).unwrap(), seq);
    }

    #[test]
    fn drop_everything_leaves_text() {
        let seq = concat_tokens(vec![Segment::vision("a", 4), Segment::vision("b", 3)], 2);
        let out = apply_pruning(&seq, &PruningPolicy::random_drop(7, DropScope::All, 3)).unwrap();
        assert_eq!(out.total_len, 2);
        assert_eq!(out.vision_len(), 0);
        assert_eq!(out.segment("text").unwrap().indices, vec![0, 1]);
    }

    #[test]
    fn local_only_spares_global_tokens() {
        let seq = concat_tokens(vec![Segment::vision("slime", 10).with_local_range(5, 10)], 1);
        let out = apply_pruning(&seq, &PruningPolicy::random_drop(5, DropScope::LocalOnly, 11)).unwrap();
        assert_eq!(out.segment("slime").unwrap().indices, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn errors() {
        let seq = concat_tokens(vec![Segment::vision("a", 3)], 1);
        assert!(matches!(
            apply_pruning(&seq, &PruningPolicy::random_drop(4, DropScope::All, 0)),
            Err(FusionError::DropExceedsEligible { n: 4, eligible: 3 })
        ));
        assert!(matches!(
            apply_pruning(&seq, &PruningPolicy::random_drop(1, DropScope::LocalOnly, 0)),
            Err(FusionError::NoLocalRange)
        ));
    }

    #[test]
    fn sparsity_leaves_sequence() {
        let seq = concat_tokens(vec![Segment::vision("a", 3)], 1);
        assert_eq!(apply_pruning(&seq, &PruningPolicy::layer_sparsity(2, 0.5)).unwrap(), seq);
    }
}
