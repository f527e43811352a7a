//! The safetensors container: `u64` LE header length `N`, `N` bytes of UTF-8
//! JSON, then the packed little-endian data region.
//!
//! Writing is canonical: keys sorted bytewise (`__metadata__` included), no
//! whitespace, tensors packed in sorted-name order. Two logically equal
//! [`ModelWeights`] always serialize to the same bytes.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde_json::Value;

use super::tensor::element_count;
use super::weights::validate_name;
use super::{Dtype, ModelWeights, StoreError, Tensor};

pub(crate) const METADATA_KEY: &str = "__metadata__";

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    pub allow_nan: bool,
}

/// Non-fatal findings while parsing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LoadWarning {
    /// Bytes of the data region that no tensor references.
    UnreferencedBytes { count: u64 },
}

#[derive(Debug, Clone)]
pub struct Loaded {
    pub weights: ModelWeights,
    pub warnings: Vec<LoadWarning>,
}

pub fn load_safetensors(path: impl AsRef<Path>) -> Result<ModelWeights, StoreError> {
    let loaded = load_safetensors_with(path.as_ref(), LoadOptions::default())?;
    for w in &loaded.warnings {
        log::warn!("{}: {w:?}", path.as_ref().display());
    }
    Ok(loaded.weights)
}

pub fn load_safetensors_with(path: impl AsRef<Path>, opts: LoadOptions) -> Result<Loaded, StoreError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode_safetensors(&bytes, opts)
}

pub fn save_safetensors(weights: &ModelWeights, path: impl AsRef<Path>) -> Result<(), StoreError> {
    let path = path.as_ref();
    let bytes = encode_safetensors(weights)?;
    fs::write(path, bytes).map_err(|source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    })
}

struct RawEntry {
    name: String,
    dtype: Dtype,
    shape: Vec<usize>,
    start: u64,
    end: u64,
}

pub fn decode_safetensors(bytes: &[u8], opts: LoadOptions) -> Result<Loaded, StoreError> {
    if bytes.len() < 8 {
        return Err(StoreError::HeaderLength(format!(
            "file has {} bytes, need at least 8 for the length field",
            bytes.len()
        )));
    }
    let declared = u64::from_le_bytes(bytes[..8].try_into().expect("8 bytes"));
    let available = (bytes.len() - 8) as u64;
    if declared > available {
        return Err(StoreError::HeaderLength(format!(
            "header declares {declared} bytes but only {available} follow the length field"
        )));
    }
    let header_end = 8 + declared as usize;
    let header = std::str::from_utf8(&bytes[8..header_end])
        .map_err(|e| StoreError::Json(format!("header is not UTF-8: {e}")))?;
    let root: Value = serde_json::from_str(header).map_err(|e| StoreError::Json(e.to_string()))?;
    let Value::Object(root) = root else {
        return Err(StoreError::Json("header is not a JSON object".into()));
    };

    let data = &bytes[header_end..];
    let data_len = data.len() as u64;
    let mut metadata = BTreeMap::new();
    let mut entries = Vec::with_capacity(root.len());

    for (name, value) in root {
        if name == METADATA_KEY {
            metadata = parse_metadata(value)?;
            continue;
        }
        validate_name(&name)?;
        let entry = parse_entry(name, &value)?;
        let expected = (element_count(&entry.shape) as u64)
            .checked_mul(entry.dtype.byte_width() as u64)
            .ok_or_else(|| StoreError::TooLarge(entry.name.clone()))?;
        if entry.end < entry.start {
            return Err(StoreError::Json(format!(
                "tensor {:?}: data_offsets end {} precedes start {}",
                entry.name, entry.end, entry.start
            )));
        }
        let actual = entry.end - entry.start;
        if actual != expected {
            return Err(StoreError::SizeMismatch {
                name: entry.name,
                shape: entry.shape,
                dtype: entry.dtype,
                expected,
                actual,
            });
        }
        if entry.end > data_len {
            return Err(StoreError::OutOfBounds {
                name: entry.name,
                start: entry.start,
                end: entry.end,
                len: data_len,
            });
        }
        entries.push(entry);
    }

    entries.sort_by(|a, b| (a.start, a.end, &a.name).cmp(&(b.start, b.end, &b.name)));

    let mut covered = 0u64;
    let mut frontier = 0u64;
    let mut last_owner: Option<&str> = None;
    for e in entries.iter().filter(|e| e.end > e.start) {
        if e.start < frontier {
            return Err(StoreError::Overlap {
                first: last_owner.unwrap_or_default().to_string(),
                second: e.name.clone(),
            });
        }
        covered += e.end - e.start;
        frontier = e.end;
        last_owner = Some(&e.name);
    }
    let mut warnings = Vec::new();
    if covered < data_len {
        warnings.push(LoadWarning::UnreferencedBytes {
            count: data_len - covered,
        });
    }

    let mut weights = ModelWeights::new();
    for e in entries {
        let raw = &data[e.start as usize..e.end as usize];
        let values = e.dtype.decode(raw);
        let tensor = Tensor::new_allow_nan(e.dtype, e.shape, values)?;
        if !opts.allow_nan && tensor.has_nan() {
            return Err(StoreError::NaN { name: e.name });
        }
        weights.insert(e.name, tensor)?;
    }
    *weights.metadata_mut() = metadata;
    Ok(Loaded { weights, warnings })
}

fn parse_metadata(value: Value) -> Result<BTreeMap<String, String>, StoreError> {
    let Value::Object(map) = value else {
        return Err(StoreError::Json("__metadata__ must be an object".into()));
    };
    map.into_iter()
        .map(|(k, v)| match v {
            Value::String(s) => Ok((k, s)),
            other => Err(StoreError::Json(format!(
                "__metadata__ value for {k:?} must be a string, got {other}"
            ))),
        })
        .collect()
}

fn parse_entry(name: String, value: &Value) -> Result<RawEntry, StoreError> {
    let bad = |what: &str| StoreError::Json(format!("tensor {name:?}: {what}"));
    let obj = value.as_object().ok_or_else(|| bad("entry must be an object"))?;
    let dtype: Dtype = obj
        .get("dtype")
        .and_then(Value::as_str)
        .ok_or_else(|| bad("missing string field \"dtype\""))?
        .parse()?;
    let shape = obj
        .get("shape")
        .and_then(Value::as_array)
        .ok_or_else(|| bad("missing array field \"shape\""))?
        .iter()
        .map(|d| {
            d.as_u64()
                .and_then(|d| usize::try_from(d).ok())
                .ok_or_else(|| bad("shape entries must be non-negative integers"))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let offsets = obj
        .get("data_offsets")
        .and_then(Value::as_array)
        .filter(|a| a.len() == 2)
        .ok_or_else(|| bad("\"data_offsets\" must be a two-element array"))?;
    let start = offsets[0]
        .as_u64()
        .ok_or_else(|| bad("data_offsets must be non-negative integers"))?;
    let end = offsets[1]
        .as_u64()
        .ok_or_else(|| bad("data_offsets must be non-negative integers"))?;
    Ok(RawEntry {
        name,
        dtype,
        shape,
        start,
        end,
    })
}

pub fn encode_safetensors(weights: &ModelWeights) -> Result<Vec<u8>, StoreError> {
    // Sorted key -> serialized value; "__metadata__" sorts with the tensor names.
    let mut header_items: BTreeMap<&str, String> = BTreeMap::new();
    let mut offset: u64 = 0;
    let names = weights.sorted_names();
    for &name in &names {
        let t = weights.get(name).expect("name from the same map");
        validate_name(name)?;
        let len = u64::try_from(t.byte_len()).map_err(|_| StoreError::TooLarge(name.into()))?;
        let end = offset
            .checked_add(len)
            .ok_or_else(|| StoreError::TooLarge(name.into()))?;
        let shape = t
            .shape()
            .iter()
            .map(|d| d.to_string())
            .collect::<Vec<_>>()
            .join(",");
        header_items.insert(
            name,
            format!(
                "{{\"data_offsets\":[{offset},{end}],\"dtype\":\"{}\",\"shape\":[{shape}]}}",
                t.dtype()
            ),
        );
        offset = end;
    }
    if !weights.metadata().is_empty() {
        let meta = serde_json::to_string(weights.metadata()).map_err(|e| StoreError::Json(e.to_string()))?;
        header_items.insert(METADATA_KEY, meta);
    }

    let mut header = String::from("{");
    for (i, (key, value)) in header_items.iter().enumerate() {
        if i > 0 {
            header.push(',');
        }
        header.push_str(&serde_json::to_string(key).map_err(|e| StoreError::Json(e.to_string()))?);
        header.push(':');
        header.push_str(value);
    }
    header.push('}');

    let data_len = usize::try_from(offset).map_err(|_| StoreError::TooLarge("<data region>".into()))?;
    let mut out = Vec::with_capacity(8 + header.len() + data_len);
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    for name in names {
        let t = weights.get(name).expect("name from the same map");
        t.dtype().encode_into(t.values(), &mut out);
    }
    Ok(out)
}
