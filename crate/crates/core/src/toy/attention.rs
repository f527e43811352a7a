use super::matrix::Matrix;
use super::ToyError;

/// Text→vision attention: rows are text positions, columns vision positions.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionMap {
    /// `per_layer[layer][head]`, each `[text_len × vision_len]`.
    pub per_layer: Vec<Vec<Matrix>>,
    /// Mean over layers and heads.
    pub averaged: Matrix,
}

impl AttentionMap {
    pub fn new(per_layer: Vec<Vec<Matrix>>) -> Result<Self, ToyError> {
        let first = per_layer
            .first()
            .and_then(|heads| heads.first())
            .ok_or_else(|| ToyError::Shape("attention map has no layers or heads".into()))?;
        let (rows, cols) = (first.rows, first.cols);
        let mut sum = vec![0.0f64; rows * cols];
        let mut count = 0usize;
        for heads in &per_layer {
            for m in heads {
                if (m.rows, m.cols) != (rows, cols) {
                    return Err(ToyError::Shape(format!(
                        "attention slice {}x{} differs from {rows}x{cols}",
                        m.rows, m.cols
                    )));
                }
                sum.iter_mut().zip(&m.data).for_each(|(s, &v)| *s += f64::from(v));
                count += 1;
            }
        }
        let averaged = Matrix::from_vec(rows, cols, sum.iter().map(|s| (s / count as f64) as f32).collect());
        Ok(Self { per_layer, averaged })
    }

    /// Convenience for one head per layer.
    pub fn from_layers(layers: Vec<Matrix>) -> Result<Self, ToyError> {
        Self::new(layers.into_iter().map(|m| vec![m]).collect())
    }

    pub fn text_len(&self) -> usize {
        self.averaged.rows
    }

    pub fn vision_len(&self) -> usize {
        self.averaged.cols
    }

    /// Attention mass over columns `[start, end)`, summed over text rows and
    /// averaged over layers and heads.
    pub fn mass(&self, start: usize, end: usize) -> f64 {
        (0..self.averaged.rows)
            .map(|r| self.averaged.row(r)[start..end].iter().map(|&v| f64::from(v)).sum::<f64>())
            .sum()
    }

    /// As [`Self::mass`] but for a single layer (mean over its heads).
    pub fn layer_mass(&self, layer: usize, start: usize, end: usize) -> f64 {
        let heads = &self.per_layer[layer];
        heads
            .iter()
            .map(|m| {
                (0..m.rows)
                    .map(|r| m.row(r)[start..end].iter().map(|&v| f64::from(v)).sum::<f64>())
                    .sum::<f64>()
            })
            .sum::<f64>()
            / heads.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn averages_over_layers() {
        let m = AttentionMap::from_layers(vec![
            Matrix::from_vec(1, 2, vec![1.0, 0.0]),
            Matrix::from_vec(1, 2, vec![0.0, 1.0]),
        ])
        .unwrap();
        assert_eq!(m.averaged.data, vec![0.5, 0.5]);
        assert!((m.mass(0, 1) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn empty_rejected() {
        assert!(AttentionMap::new(vec![]).is_err());
        assert!(AttentionMap::new(vec![vec![]]).is_err());
    }

    #[test]
    fn ragged_rejected() {
        let r = AttentionMap::from_layers(vec![Matrix::zeros(1, 2), Matrix::zeros(1, 3)]);
        assert!(r.is_err());
    }
}
