use std::collections::BTreeMap;
use std::sync::OnceLock;

use indexmap::IndexMap;

use super::format::METADATA_KEY;
use super::{StoreError, Tensor};
use crate::rng::Fnv1a64;

/// A named set of tensors plus string metadata.
///
/// Insertion order is kept (loaders insert in data-offset order) but never
/// affects equality, the fingerprint or the saved bytes.
#[derive(Debug, Clone, Default)]
pub struct ModelWeights {
    entries: IndexMap<String, Tensor>,
    metadata: BTreeMap<String, String>,
    fingerprint: OnceLock<u64>,
}

impl PartialEq for ModelWeights {
    fn eq(&self, other: &Self) -> bool {
        self.entries == other.entries && self.metadata == other.metadata
    }
}

impl ModelWeights {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_entries<I, S>(entries: I) -> Result<Self, StoreError>
    where
        I: IntoIterator<Item = (S, Tensor)>,
        S: Into<String>,
    {
        let mut w = Self::new();
        for (name, t) in entries {
            w.insert(name, t)?;
        }
        Ok(w)
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) -> Result<(), StoreError> {
        let name = name.into();
        validate_name(&name)?;
        if self.entries.contains_key(&name) {
            return Err(StoreError::DuplicateName(name));
        }
        self.entries.insert(name, tensor);
        self.fingerprint = OnceLock::new();
        Ok(())
    }

    /// Replaces an existing tensor or inserts a new one.
    pub fn put(&mut self, name: impl Into<String>, tensor: Tensor) -> Result<(), StoreError> {
        let name = name.into();
        validate_name(&name)?;
        self.entries.insert(name, tensor);
        self.fingerprint = OnceLock::new();
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.entries.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.fingerprint = OnceLock::new();
        self.entries.get_mut(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn sorted_names(&self) -> Vec<&str> {
        let mut names: Vec<&str> = self.names().collect();
        names.sort_unstable();
        names
    }

    pub fn metadata(&self) -> &BTreeMap<String, String> {
        &self.metadata
    }

    pub fn set_metadata(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.metadata.insert(key.into(), value.into());
    }

    pub fn metadata_mut(&mut self) -> &mut BTreeMap<String, String> {
        &mut self.metadata
    }

    pub fn total_elements(&self) -> usize {
        self.entries.values().map(Tensor::len).sum()
    }

    /// FNV-1a over sorted names, dtypes, shapes and encoded data. Metadata is
    /// not part of the fingerprint.
    pub fn fingerprint(&self) -> u64 {
        *self.fingerprint.get_or_init(|| {
            let mut h = Fnv1a64::new();
            for name in self.sorted_names() {
                let t = &self.entries[name];
                h.update(&(name.len() as u64).to_le_bytes());
                h.update(name.as_bytes());
                h.update(t.dtype().as_str().as_bytes());
                h.update(&(t.shape().len() as u64).to_le_bytes());
                for &d in t.shape() {
                    h.update(&(d as u64).to_le_bytes());
                }
                h.update(&t.encode());
            }
            h.finish()
        })
    }
}

pub(crate) fn validate_name(name: &str) -> Result<(), StoreError> {
    if name.is_empty() || name.contains('\0') || name == METADATA_KEY {
        return Err(StoreError::InvalidName(name.to_string()));
    }
    Ok(())
}
