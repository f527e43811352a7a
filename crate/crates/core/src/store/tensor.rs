use super::{Dtype, StoreError};

/// A dense row-major tensor. An empty shape is a scalar with one element.
///
/// Equality is bitwise on the stored values, so `-0.0 != 0.0` and a NaN
/// equals a NaN with the same payload.
#[derive(Debug, Clone)]
pub struct Tensor {
    dtype: Dtype,
    shape: Vec<usize>,
    values: Vec<f32>,
}

impl Tensor {
    /// Builds a tensor, rounding every value to `dtype`. NaN is rejected.
    pub fn new(dtype: Dtype, shape: Vec<usize>, values: Vec<f32>) -> Result<Self, StoreError> {
        let t = Self::new_allow_nan(dtype, shape, values)?;
        if t.has_nan() {
            return Err(StoreError::NaN { name: String::new() });
        }
        Ok(t)
    }

    pub fn new_allow_nan(
        dtype: Dtype,
        shape: Vec<usize>,
        mut values: Vec<f32>,
    ) -> Result<Self, StoreError> {
        let expected = element_count(&shape);
        if expected != values.len() {
            return Err(StoreError::ElementCount {
                shape,
                expected,
                actual: values.len(),
            });
        }
        if dtype != Dtype::F32 {
            values.iter_mut().for_each(|v| *v = dtype.round_f32(*v));
        }
        Ok(Self { dtype, shape, values })
    }

    /// Narrows f64 compute values to `dtype` with one rounding step.
    pub fn from_f64(dtype: Dtype, shape: Vec<usize>, values: &[f64]) -> Result<Self, StoreError> {
        let narrowed = values.iter().map(|&v| dtype.round_f64(v)).collect();
        Self::new(dtype, shape, narrowed)
    }

    pub fn zeros(dtype: Dtype, shape: Vec<usize>) -> Self {
        let n = element_count(&shape);
        Self {
            dtype,
            shape,
            values: vec![0.0; n],
        }
    }

    pub fn scalar(dtype: Dtype, value: f32) -> Result<Self, StoreError> {
        Self::new(dtype, Vec::new(), vec![value])
    }

    pub fn dtype(&self) -> Dtype {
        self.dtype
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn byte_len(&self) -> usize {
        self.values.len() * self.dtype.byte_width()
    }

    pub fn has_nan(&self) -> bool {
        self.values.iter().any(|v| v.is_nan())
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.values.iter().map(|&v| f64::from(v)).collect()
    }

    /// Writes `value` at a flat index, rounding to the dtype.
    pub fn set(&mut self, index: usize, value: f32) {
        self.values[index] = self.dtype.round_f32(value);
    }

    pub fn into_values(self) -> Vec<f32> {
        self.values
    }

    pub(crate) fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.dtype.encode_into(&self.values, &mut out);
        out
    }
}

impl PartialEq for Tensor {
    fn eq(&self, other: &Self) -> bool {
        self.dtype == other.dtype
            && self.shape == other.shape
            && self.values.len() == other.values.len()
            && self
                .values
                .iter()
                .zip(&other.values)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

pub(crate) fn element_count(shape: &[usize]) -> usize {
    shape.iter().product()
}
