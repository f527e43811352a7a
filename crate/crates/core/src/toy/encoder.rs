use super::config::ToyEncoderConfig;
use super::matrix::Matrix;
use super::ToyError;
use crate::store::ModelWeights;

/// Fixed preprocessing: token `j`, feature `f` is the mean of `window`
/// consecutive image entries starting at `offset + (j·F + f)·window`
/// (indices wrap around the image).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PreprocessSpec {
    pub window: usize,
    pub offset: usize,
}

impl PreprocessSpec {
    pub fn apply(&self, image: &[f32], spec: &ToyEncoderConfig) -> Matrix {
        let f_dim = spec.feature_dim;
        let n = image.len();
        let mut out = Matrix::zeros(spec.token_len, f_dim);
        for j in 0..spec.token_len {
            for f in 0..f_dim {
                let start = self.offset + (j * f_dim + f) * self.window;
                let sum: f32 = (0..self.window).map(|k| image[(start + k) % n]).sum();
                out.data[j * f_dim + f] = sum / self.window as f32;
            }
        }
        out
    }
}

/// Preprocessing, encoder (`tanh(xW + b)`) and projector (`hP + c`) for one
/// synthetic vision tower.
///
/// Weight names: `enc.weight [F, F]`, `enc.bias [F]`, `proj.weight [F, d]`,
/// `proj.bias [d]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderBundle {
    pub name: String,
    pub spec: ToyEncoderConfig,
    pub preprocess: PreprocessSpec,
    pub weights: ModelWeights,
    pub model_dim: usize,
    pub image_dim: usize,
}

impl EncoderBundle {
    fn tensor(&self, name: &str, shape: &[usize]) -> Result<&[f32], ToyError> {
        let t = self
            .weights
            .get(name)
            .ok_or_else(|| ToyError::Shape(format!("encoder {} lacks {name}", self.name)))?;
        if t.shape() != shape {
            return Err(ToyError::Shape(format!(
                "encoder {} tensor {name} has shape {:?}, expected {shape:?}",
                self.name,
                t.shape()
            )));
        }
        Ok(t.values())
    }
}

/// Vision tokens `[token_len, model_dim]` for one image.
pub fn encode_image(encoder: &EncoderBundle, image: &[f32]) -> Result<Matrix, ToyError> {
    if image.len() != encoder.image_dim {
        return Err(ToyError::Shape(format!(
            "image has {} values, encoder {} expects {}",
            image.len(),
            encoder.name,
            encoder.image_dim
        )));
    }
    let f = encoder.spec.feature_dim;
    let d = encoder.model_dim;
    let enc_w = encoder.tensor("enc.weight", &[f, f])?;
    let enc_b = encoder.tensor("enc.bias", &[f])?;
    let proj_w = encoder.tensor("proj.weight", &[f, d])?;
    let proj_b = encoder.tensor("proj.bias", &[d])?;

    let mut macs = 0;
    let patches = encoder.preprocess.apply(image, &encoder.spec);
    let mut hidden = patches.matmul(enc_w, f, &mut macs);
    for r in 0..hidden.rows {
        for (h, b) in hidden.row_mut(r).iter_mut().zip(enc_b) {
            *h = (*h + b).tanh();
        }
    }
    let mut tokens = hidden.matmul(proj_w, d, &mut macs);
    for r in 0..tokens.rows {
        tokens.row_mut(r).iter_mut().zip(proj_b).for_each(|(t, b)| *t += b);
    }
    Ok(tokens)
}
