//! Attention-overlap and feature-distribution statistics between models.

mod features;
mod iou;
mod scores;

pub use features::{feature_stats, FeatureStats, MAX_COSINE_PAIRS};
pub use iou::{iou_curve, top_k, topk_iou, top_count, IoUCurve, IoUPoint};
pub use scores::{average_attention, TokenScoreVector};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum AnalysisError {
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("length mismatch: {a} vs {b}")]
    LengthMismatch { a: usize, b: usize },
    #[error("score {index} is not finite")]
    NonFinite { index: usize },
    #[error("percentage {0} outside (0, 100]")]
    Percentage(f64),
    #[error("percentages must be strictly increasing ({prev} then {next})")]
    Unordered { prev: f64, next: f64 },
    #[error("feature dimension mismatch: {a} vs {b}")]
    DimMismatch { a: usize, b: usize },
}
