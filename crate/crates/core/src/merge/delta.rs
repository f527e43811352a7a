use indexmap::IndexMap;

use super::MergeError;
use crate::store::{validate_compatibility, Dtype, ModelWeights, Tensor};

pub const META_BASE_FINGERPRINT: &str = "base_fingerprint";
pub const META_SOURCE_LABEL: &str = "source_label";

/// One tensor of fine-tuning change, held at compute precision.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaTensor {
    /// Storage dtype of the base tensor this delta applies to.
    pub dtype: Dtype,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

/// `model - base` for every tensor, tagged with the base it was taken against.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaSet {
    entries: IndexMap<String, DeltaTensor>,
    base_fingerprint: u64,
    source_label: String,
}

impl DeltaSet {
    pub fn new(
        entries: IndexMap<String, DeltaTensor>,
        base_fingerprint: u64,
        source_label: impl Into<String>,
    ) -> Self {
        Self {
            entries,
            base_fingerprint,
            source_label: source_label.into(),
        }
    }

    pub fn base_fingerprint(&self) -> u64 {
        self.base_fingerprint
    }

    pub fn source_label(&self) -> &str {
        &self.source_label
    }

    pub fn get(&self, name: &str) -> Option<&DeltaTensor> {
        self.entries.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &DeltaTensor)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.source_label = label.into();
        self
    }

    /// Mutable access for building synthetic deltas; callers keep the layout.
    pub fn values_mut(&mut self, name: &str) -> Option<&mut Vec<f64>> {
        self.entries.get_mut(name).map(|t| &mut t.values)
    }

    /// Narrows to the base dtypes; fingerprint and label go into metadata.
    pub fn to_weights(&self) -> Result<ModelWeights, MergeError> {
        let mut w = ModelWeights::new();
        for (name, d) in &self.entries {
            w.insert(name.clone(), Tensor::from_f64(d.dtype, d.shape.clone(), &d.values)?)?;
        }
        w.set_metadata(META_BASE_FINGERPRINT, format!("{:016x}", self.base_fingerprint));
        w.set_metadata(META_SOURCE_LABEL, self.source_label.clone());
        Ok(w)
    }

    pub fn from_weights(w: &ModelWeights) -> Result<Self, MergeError> {
        let fp = w
            .metadata()
            .get(META_BASE_FINGERPRINT)
            .and_then(|s| u64::from_str_radix(s, 16).ok())
            .ok_or(MergeError::MissingMetadata(META_BASE_FINGERPRINT))?;
        let label = w.metadata().get(META_SOURCE_LABEL).cloned().unwrap_or_default();
        let entries = w
            .iter()
            .map(|(n, t)| {
                (
                    n.to_string(),
                    DeltaTensor {
                        dtype: t.dtype(),
                        shape: t.shape().to_vec(),
                        values: t.to_f64(),
                    },
                )
            })
            .collect();
        Ok(Self::new(entries, fp, label))
    }

    /// `base + delta`, narrowed to the base dtypes.
    pub fn apply(&self, base: &ModelWeights) -> Result<ModelWeights, MergeError> {
        super::methods::merge_task_arithmetic(base, std::slice::from_ref(self), 1.0)
    }
}

fn delta_tensor(model: &Tensor, base: &Tensor) -> DeltaTensor {
    DeltaTensor {
        dtype: base.dtype(),
        shape: base.shape().to_vec(),
        values: model
            .values()
            .iter()
            .zip(base.values())
            .map(|(&m, &b)| f64::from(m) - f64::from(b))
            .collect(),
    }
}

/// Elementwise `model - base`. The two models must be structurally identical.
pub fn compute_delta(model: &ModelWeights, base: &ModelWeights, label: &str) -> Result<DeltaSet, MergeError> {
    let report = validate_compatibility(model, base);
    if !report.is_compatible() {
        return Err(MergeError::Incompatible(Box::new(report)));
    }
    let entries = base
        .iter()
        .map(|(name, b)| (name.to_string(), delta_tensor(model.get(name).expect("compatible"), b)))
        .collect();
    Ok(DeltaSet::new(entries, base.fingerprint(), label))
}

/// Like [`compute_delta`] but tolerates structural mismatches: tensors that
/// are missing from `model` or differ in shape or dtype get a zero delta.
/// Returns the skipped names alongside the delta.
pub fn compute_delta_partial(
    model: &ModelWeights,
    base: &ModelWeights,
    label: &str,
) -> (DeltaSet, Vec<String>) {
    let report = validate_compatibility(model, base);
    let mut skipped = Vec::new();
    let entries = base
        .iter()
        .map(|(name, b)| {
            let d = match model.get(name) {
                Some(m) if report.is_clean(name) => delta_tensor(m, b),
                _ => {
                    skipped.push(name.to_string());
                    DeltaTensor {
                        dtype: b.dtype(),
                        shape: b.shape().to_vec(),
                        values: vec![0.0; b.len()],
                    }
                }
            };
            (name.to_string(), d)
        })
        .collect();
    skipped.sort();
    (DeltaSet::new(entries, base.fingerprint(), label), skipped)
}
