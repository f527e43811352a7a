use std::fmt;

use serde::Serialize;

use super::{Dtype, ModelWeights};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Mismatch<T> {
    pub name: String,
    pub a: T,
    pub b: T,
}

/// Structural differences between two checkpoints. All lists are sorted by name.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CompatReport {
    /// Names present in exactly one of the two models.
    pub name_diff: Vec<String>,
    pub only_in_a: Vec<String>,
    pub only_in_b: Vec<String>,
    pub shape_mismatches: Vec<Mismatch<Vec<usize>>>,
    pub dtype_mismatches: Vec<Mismatch<Dtype>>,
}

impl CompatReport {
    pub fn is_compatible(&self) -> bool {
        self.name_diff.is_empty() && self.shape_mismatches.is_empty() && self.dtype_mismatches.is_empty()
    }

    /// Names that exist in both models with equal shape and dtype.
    pub fn is_clean(&self, name: &str) -> bool {
        !self.name_diff.iter().any(|n| n == name)
            && !self.shape_mismatches.iter().any(|m| m.name == name)
            && !self.dtype_mismatches.iter().any(|m| m.name == name)
    }
}

impl fmt::Display for CompatReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_compatible() {
            return f.write_str("compatible");
        }
        write!(f, "incompatible:")?;
        for n in &self.only_in_a {
            write!(f, " [only in a: {n}]")?;
        }
        for n in &self.only_in_b {
            write!(f, " [only in b: {n}]")?;
        }
        for m in &self.shape_mismatches {
            write!(f, " [shape {}: {:?} vs {:?}]", m.name, m.a, m.b)?;
        }
        for m in &self.dtype_mismatches {
            write!(f, " [dtype {}: {} vs {}]", m.name, m.a, m.b)?;
        }
        Ok(())
    }
}

pub fn validate_compatibility(a: &ModelWeights, b: &ModelWeights) -> CompatReport {
    let mut report = CompatReport::default();
    for name in a.sorted_names() {
        let ta = a.get(name).expect("listed name");
        match b.get(name) {
            None => report.only_in_a.push(name.to_string()),
            Some(tb) => {
                if ta.shape() != tb.shape() {
                    report.shape_mismatches.push(Mismatch {
                        name: name.to_string(),
                        a: ta.shape().to_vec(),
                        b: tb.shape().to_vec(),
                    });
                }
                if ta.dtype() != tb.dtype() {
                    report.dtype_mismatches.push(Mismatch {
                        name: name.to_string(),
                        a: ta.dtype(),
                        b: tb.dtype(),
                    });
                }
            }
        }
    }
    report.only_in_b = b
        .sorted_names()
        .into_iter()
        .filter(|n| !a.contains(n))
        .map(str::to_string)
        .collect();
    report.name_diff = report.only_in_a.iter().chain(&report.only_in_b).cloned().collect();
    report.name_diff.sort();
    report
}
