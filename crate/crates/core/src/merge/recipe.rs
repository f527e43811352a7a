use std::fmt;

use serde::{Deserialize, Serialize};

use super::{check_range, MergeError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MergeMethod {
    /// `α·Δa + (1−α)·Δb + base`.
    Interpolate2,
    /// `base + λ·ΣΔᵢ`.
    TaskArithmetic,
    /// Mean of the raw source weights.
    Average,
    Ties,
    Dare,
    Slerp,
}

impl MergeMethod {
    pub const ALL: [MergeMethod; 6] = [
        MergeMethod::Interpolate2,
        MergeMethod::TaskArithmetic,
        MergeMethod::Average,
        MergeMethod::Ties,
        MergeMethod::Dare,
        MergeMethod::Slerp,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MergeMethod::Interpolate2 => "interpolate2",
            MergeMethod::TaskArithmetic => "task_arithmetic",
            MergeMethod::Average => "average",
            MergeMethod::Ties => "ties",
            MergeMethod::Dare => "dare",
            MergeMethod::Slerp => "slerp",
        }
    }

    /// Number of sources the method needs, if fixed.
    pub fn required_sources(self) -> Option<usize> {
        match self {
            MergeMethod::Interpolate2 | MergeMethod::Slerp => Some(2),
            _ => None,
        }
    }

    pub fn is_randomized(self) -> bool {
        self == MergeMethod::Dare
    }
}

impl fmt::Display for MergeMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

fn default_lambda() -> f64 {
    1.0
}
fn default_half() -> f64 {
    0.5
}
fn default_retain() -> f64 {
    0.2
}

/// Method selector plus every scalar hyperparameter. Only the fields the
/// method uses are consulted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MergeParams {
    pub method: MergeMethod,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_half")]
    pub alpha: f64,
    #[serde(default = "default_retain")]
    pub retain_ratio: f64,
    #[serde(default = "default_half")]
    pub drop_rate: f64,
    #[serde(default = "default_half")]
    pub t: f64,
    #[serde(default)]
    pub seed: u64,
}

impl MergeParams {
    pub fn new(method: MergeMethod) -> Self {
        Self {
            method,
            lambda: default_lambda(),
            alpha: default_half(),
            retain_ratio: default_retain(),
            drop_rate: default_half(),
            t: default_half(),
            seed: 0,
        }
    }

    pub fn task_arithmetic(lambda: f64) -> Self {
        Self { lambda, ..Self::new(MergeMethod::TaskArithmetic) }
    }

    pub fn ties(lambda: f64, retain_ratio: f64) -> Self {
        Self { lambda, retain_ratio, ..Self::new(MergeMethod::Ties) }
    }

    pub fn dare(lambda: f64, drop_rate: f64, seed: u64) -> Self {
        Self { lambda, drop_rate, seed, ..Self::new(MergeMethod::Dare) }
    }

    pub fn interpolate2(alpha: f64) -> Self {
        Self { alpha, ..Self::new(MergeMethod::Interpolate2) }
    }

    pub fn slerp(t: f64) -> Self {
        Self { t, ..Self::new(MergeMethod::Slerp) }
    }

    /// Range checks for the fields this method reads.
    pub fn validate(&self) -> Result<(), MergeError> {
        let uses_lambda = matches!(
            self.method,
            MergeMethod::TaskArithmetic | MergeMethod::Ties | MergeMethod::Dare
        );
        if uses_lambda {
            check_range("lambda", self.lambda, true, "finite")?;
        }
        match self.method {
            MergeMethod::Interpolate2 => {
                check_range("alpha", self.alpha, (0.0..=1.0).contains(&self.alpha), "[0, 1]")
            }
            MergeMethod::Ties => check_range(
                "retain_ratio",
                self.retain_ratio,
                self.retain_ratio > 0.0 && self.retain_ratio <= 1.0,
                "(0, 1]",
            ),
            MergeMethod::Dare => check_range(
                "drop_rate",
                self.drop_rate,
                (0.0..1.0).contains(&self.drop_rate),
                "[0, 1)",
            ),
            MergeMethod::Slerp => check_range("t", self.t, (0.0..=1.0).contains(&self.t), "[0, 1]"),
            MergeMethod::TaskArithmetic | MergeMethod::Average => Ok(()),
        }
    }

    /// The parameters the method reads, in tie-break order.
    pub fn key(&self) -> [f64; 5] {
        [self.lambda, self.alpha, self.retain_ratio, self.drop_rate, self.t]
    }
}

impl fmt::Display for MergeParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.method)?;
        match self.method {
            MergeMethod::TaskArithmetic => write!(f, "(lambda={})", self.lambda),
            MergeMethod::Interpolate2 => write!(f, "(alpha={})", self.alpha),
            MergeMethod::Average => Ok(()),
            MergeMethod::Ties => write!(f, "(lambda={}, retain_ratio={})", self.lambda, self.retain_ratio),
            MergeMethod::Dare => write!(
                f,
                "(lambda={}, drop_rate={}, seed={})",
                self.lambda, self.drop_rate, self.seed
            ),
            MergeMethod::Slerp => write!(f, "(t={})", self.t),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceRef {
    pub model: String,
    pub label: String,
}

/// A recipe file: base and source model references plus parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MergeRecipe {
    pub base: String,
    pub sources: Vec<SourceRef>,
    pub method: MergeMethod,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_half")]
    pub alpha: f64,
    #[serde(default = "default_retain")]
    pub retain_ratio: f64,
    #[serde(default = "default_half")]
    pub drop_rate: f64,
    #[serde(default = "default_half")]
    pub t: f64,
    #[serde(default)]
    pub seed: u64,
}

impl MergeRecipe {
    pub fn new(base: impl Into<String>, sources: Vec<SourceRef>, params: MergeParams) -> Self {
        Self {
            base: base.into(),
            sources,
            method: params.method,
            lambda: params.lambda,
            alpha: params.alpha,
            retain_ratio: params.retain_ratio,
            drop_rate: params.drop_rate,
            t: params.t,
            seed: params.seed,
        }
    }

    pub fn params(&self) -> MergeParams {
        MergeParams {
            method: self.method,
            lambda: self.lambda,
            alpha: self.alpha,
            retain_ratio: self.retain_ratio,
            drop_rate: self.drop_rate,
            t: self.t,
            seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<(), MergeError> {
        check_source_count(self.method, self.sources.len())?;
        self.params().validate()
    }
}

pub(crate) fn check_source_count(method: MergeMethod, got: usize) -> Result<(), MergeError> {
    if got == 0 {
        return Err(MergeError::NoSources);
    }
    match method.required_sources() {
        Some(expected) if expected != got => Err(MergeError::SourceCount { method, expected, got }),
        _ => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recipe_defaults_fill_in() {
        let r: MergeRecipe = serde_json::from_str(
            r#"{"base":"b.safetensors","sources":[{"model":"a.safetensors","label":"a"}],"method":"ties"}"#,
        )
        .unwrap();
        let p = r.params();
        assert_eq!((p.lambda, p.alpha, p.retain_ratio, p.drop_rate, p.t, p.seed), (1.0, 0.5, 0.2, 0.5, 0.5, 0));
        r.validate().unwrap();
    }

    #[test]
    fn unknown_fields_rejected() {
        let err = serde_json::from_str::<MergeRecipe>(
            r#"{"base":"b","sources":[],"method":"dare","lamda":0.3}"#,
        );
        assert!(err.is_err());
    }

    #[test]
    fn source_count_enforced() {
        let one = vec![SourceRef { model: "a".into(), label: "a".into() }];
        let r = MergeRecipe::new("b", one, MergeParams::slerp(0.5));
        assert!(matches!(r.validate(), Err(MergeError::SourceCount { expected: 2, got: 1, .. })));
        let r = MergeRecipe::new("b", vec![], MergeParams::task_arithmetic(1.0));
        assert!(matches!(r.validate(), Err(MergeError::NoSources)));
    }

    #[test]
    fn ranges_checked_per_method() {
        assert!(MergeParams::dare(1.0, 1.0, 0).validate().is_err());
        assert!(MergeParams::ties(1.0, 0.0).validate().is_err());
        assert!(MergeParams::interpolate2(1.5).validate().is_err());
        // drop_rate is not read by TIES
        let p = MergeParams { drop_rate: 7.0, ..MergeParams::ties(1.0, 0.3) };
        assert!(p.validate().is_ok());
    }
}
