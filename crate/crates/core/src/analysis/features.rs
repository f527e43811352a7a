use serde::Serialize;

use super::AnalysisError;
use crate::rng::SplitMix64;
use crate::toy::Matrix;

/// Cross pairs used for the mean cosine; smaller products are enumerated.
pub const MAX_COSINE_PAIRS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FeatureStats {
    pub centroid_distance: f64,
    pub mean_pairwise_cosine: f64,
    pub spread_a: f64,
    pub spread_b: f64,
    /// Cross pairs the cosine mean was taken over.
    pub pairs: usize,
}

fn centroid(m: &Matrix) -> Vec<f64> {
    let mut c = vec![0.0; m.cols];
    for r in 0..m.rows {
        c.iter_mut().zip(m.row(r)).for_each(|(s, &v)| *s += f64::from(v));
    }
    c.iter_mut().for_each(|s| *s /= m.rows as f64);
    c
}

fn distance(a: impl Iterator<Item = f64>, b: &[f64]) -> f64 {
    a.zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn spread(m: &Matrix, c: &[f64]) -> f64 {
    (0..m.rows)
        .map(|r| distance(m.row(r).iter().map(|&v| f64::from(v)), c))
        .sum::<f64>()
        / m.rows as f64
}

/// Cosine similarity; 0 when either vector is zero.
fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let (mut dot, mut na, mut nb) = (0.0f64, 0.0f64, 0.0f64);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (f64::from(x), f64::from(y));
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na.sqrt() * nb.sqrt())
    }
}

/// Summary statistics comparing two token sets with equal feature width.
/// Every cross pair enters the cosine mean when there are at most
/// [`MAX_COSINE_PAIRS`]; otherwise that many pairs are drawn from `seed`.
pub fn feature_stats(a: &Matrix, b: &Matrix, seed: u64) -> Result<FeatureStats, AnalysisError> {
    if a.rows == 0 || b.rows == 0 || a.cols == 0 {
        return Err(AnalysisError::Empty("token set"));
    }
    if a.cols != b.cols {
        return Err(AnalysisError::DimMismatch { a: a.cols, b: b.cols });
    }
    let ca = centroid(a);
    let cb = centroid(b);
    let total_pairs = a.rows * b.rows;
    let (sum, pairs) = if total_pairs <= MAX_COSINE_PAIRS {
        let mut s = 0.0;
        for i in 0..a.rows {
            for j in 0..b.rows {
                s += cosine(a.row(i), b.row(j));
            }
        }
        (s, total_pairs)
    } else {
        let mut rng = SplitMix64::new(seed);
        let mut s = 0.0;
        for _ in 0..MAX_COSINE_PAIRS {
            let i = rng.below(a.rows as u64) as usize;
            let j = rng.below(b.rows as u64) as usize;
            s += cosine(a.row(i), b.row(j));
        }
        (s, MAX_COSINE_PAIRS)
    };
    Ok(FeatureStats {
        centroid_distance: distance(ca.iter().copied(), &cb),
        mean_pairwise_cosine: sum / pairs as f64,
        spread_a: spread(a, &ca),
        spread_b: spread(b, &cb),
        pairs,
    })
}
