use std::ops::AddAssign;

use serde::Serialize;

/// Dense row-major `rows × cols` matrix of f32.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f32>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f32>) -> Self {
        assert_eq!(rows * cols, data.len(), "matrix data length");
        Self { rows, cols, data }
    }

    pub fn row(&self, r: usize) -> &[f32] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f32] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f32 {
        self.data[r * self.cols + c]
    }

    /// Rows `[start, end)`.
    pub fn rows_range(&self, start: usize, end: usize) -> Matrix {
        Matrix::from_vec(end - start, self.cols, self.data[start * self.cols..end * self.cols].to_vec())
    }

    /// Rows `[r0, r1)` and columns `[c0, c1)`.
    pub fn block(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> Matrix {
        let mut data = Vec::with_capacity((r1 - r0) * (c1 - c0));
        for r in r0..r1 {
            data.extend_from_slice(&self.row(r)[c0..c1]);
        }
        Matrix::from_vec(r1 - r0, c1 - c0, data)
    }

    pub fn vstack(parts: &[&Matrix]) -> Matrix {
        let cols = parts.first().map_or(0, |m| m.cols);
        let mut data = Vec::new();
        let mut rows = 0;
        for p in parts {
            assert_eq!(p.cols, cols, "vstack column mismatch");
            data.extend_from_slice(&p.data);
            rows += p.rows;
        }
        Matrix::from_vec(rows, cols, data)
    }

    /// `self · w` where `w` is `cols × out` row-major. Adds the multiply-add
    /// count to `macs`.
    pub fn matmul(&self, w: &[f32], out: usize, macs: &mut u64) -> Matrix {
        assert_eq!(w.len(), self.cols * out, "matmul weight shape");
        let mut res = Matrix::zeros(self.rows, out);
        for r in 0..self.rows {
            let x = self.row(r);
            let y = res.row_mut(r);
            for (k, &xk) in x.iter().enumerate() {
                let wrow = &w[k * out..(k + 1) * out];
                for (yj, &wj) in y.iter_mut().zip(wrow) {
                    *yj += xk * wj;
                }
            }
        }
        *macs += (self.rows * self.cols * out) as u64;
        res
    }
}

impl AddAssign<&Matrix> for Matrix {
    fn add_assign(&mut self, rhs: &Matrix) {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        self.data.iter_mut().zip(&rhs.data).for_each(|(a, b)| *a += b);
    }
}

/// Multiply-add counts from one forward pass, by category.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct OpCounter {
    pub attention_proj_macs: u64,
    pub attention_scores_macs: u64,
    pub mlp_macs: u64,
    /// LM head; reported but outside the layer total.
    pub head_macs: u64,
}

impl OpCounter {
    /// FLOPs of the decoder layers, two per multiply-add.
    pub fn layer_flops(&self) -> u64 {
        2 * (self.attention_proj_macs + self.attention_scores_macs + self.mlp_macs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_counts_and_values() {
        let x = Matrix::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let w = [1.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let mut macs = 0;
        let y = x.matmul(&w, 2, &mut macs);
        assert_eq!(y.data, vec![4.0, 5.0, 10.0, 11.0]);
        assert_eq!(macs, 12);
    }

    #[test]
    fn block_slices() {
        let m = Matrix::from_vec(3, 3, (0..9).map(|v| v as f32).collect());
        assert_eq!(m.block(1, 3, 0, 2).data, vec![3.0, 4.0, 6.0, 7.0]);
        assert_eq!(m.rows_range(2, 3).data, vec![6.0, 7.0, 8.0]);
    }
}
