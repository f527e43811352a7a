use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use visionfuse_core::{load_safetensors, save_safetensors, ModelWeights};

use crate::error::{CmdResult, Classify, Failure};

/// Reads a JSON document. Malformed JSON is an I/O-class failure; well-formed
/// JSON that does not fit the schema is a validation failure naming the
/// offending field.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> CmdResult<T> {
    let text = fs::read_to_string(path).io_ctx(format!("reading {}", path.display()))?;
    let mut de = serde_json::Deserializer::from_str(&text);
    let value = serde_path_to_error::deserialize::<_, T>(&mut de).map_err(|err| {
        let field = err.path().to_string();
        let inner = err.into_inner();
        let msg = if field == "." {
            format!("{}: {inner}", path.display())
        } else {
            format!("{}: at `{field}`: {inner}", path.display())
        };
        if inner.is_data() {
            Failure::Invalid(anyhow::anyhow!(msg))
        } else {
            Failure::Io(anyhow::anyhow!(msg))
        }
    })?;
    de.end().io_ctx(format!("parsing {}", path.display()))?;
    Ok(value)
}

/// Resolves `reference` against the directory holding `anchor`.
pub fn relative_to(anchor: &Path, reference: &str) -> PathBuf {
    let p = Path::new(reference);
    if p.is_absolute() {
        return p.to_path_buf();
    }
    anchor.parent().map_or_else(|| p.to_path_buf(), |dir| dir.join(p))
}

pub fn load_model(path: &Path) -> CmdResult<ModelWeights> {
    load_safetensors(path).io_ctx(format!("loading {}", path.display()))
}

pub fn save_model(weights: &ModelWeights, path: &Path) -> CmdResult {
    save_safetensors(weights, path).io_ctx(format!("writing {}", path.display()))
}

pub fn write_text(path: &Path, text: &str) -> CmdResult {
    fs::write(path, text).io_ctx(format!("writing {}", path.display()))
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}
