//! Binary container shared by checkpoints and operator caches.
//!
//! Layout: one UTF-8 line holding a JSON header
//! `{"names":[..],"shapes":[[..],..],"dtype":"f64-le","basis":{"n_modes":N,"n_quad":Q},"meta":{..}}`
//! terminated by `\n`, followed by the arrays as raw little-endian IEEE-754
//! binary64 values, concatenated in header order. The header is serialised
//! with sorted `meta` keys, so identical contents give identical bytes.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::field::BasisId;

pub const DTYPE: &str = "f64-le";

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    names: Vec<String>,
    shapes: Vec<Vec<usize>>,
    dtype: String,
    basis: BasisId,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    meta: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub basis: BasisId,
    pub meta: BTreeMap<String, Value>,
    arrays: Vec<(String, Vec<usize>, Vec<f64>)>,
}

impl Container {
    pub fn new(basis: BasisId) -> Self {
        Container {
            basis,
            meta: BTreeMap::new(),
            arrays: Vec::new(),
        }
    }

    pub fn push(&mut self, name: impl Into<String>, shape: Vec<usize>, data: Vec<f64>) -> Result<()> {
        let name = name.into();
        if shape.iter().product::<usize>() != data.len() {
            return Err(Error::Format(format!(
                "array `{name}` has {} values but shape {shape:?}",
                data.len()
            )));
        }
        if self.arrays.iter().any(|(n, _, _)| *n == name) {
            return Err(Error::Format(format!("duplicate array name `{name}`")));
        }
        self.arrays.push((name, shape, data));
        Ok(())
    }

    pub fn set_meta(&mut self, key: impl Into<String>, value: impl Into<Value>) {
        self.meta.insert(key.into(), value.into());
    }

    pub fn meta_f64(&self, key: &str) -> Result<f64> {
        self.meta
            .get(key)
            .and_then(Value::as_f64)
            .ok_or_else(|| Error::Format(format!("missing numeric meta `{key}`")))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.arrays.iter().map(|(n, _, _)| n.as_str())
    }

    pub fn get(&self, name: &str) -> Result<(&[usize], &[f64])> {
        self.arrays
            .iter()
            .find(|(n, _, _)| n == name)
            .map(|(_, s, d)| (s.as_slice(), d.as_slice()))
            .ok_or_else(|| Error::Format(format!("missing array `{name}`")))
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = Header {
            names: self.arrays.iter().map(|(n, _, _)| n.clone()).collect(),
            shapes: self.arrays.iter().map(|(_, s, _)| s.clone()).collect(),
            dtype: DTYPE.to_string(),
            basis: self.basis,
            meta: self.meta.clone(),
        };
        let json = serde_json::to_string(&header).map_err(|e| Error::Format(e.to_string()))?;
        let total: usize = self.arrays.iter().map(|(_, _, d)| d.len()).sum();
        let mut out = Vec::with_capacity(json.len() + 1 + 8 * total);
        out.extend_from_slice(json.as_bytes());
        out.push(b'\n');
        for (_, _, data) in &self.arrays {
            for v in data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let nl = bytes
            .iter()
            .position(|b| *b == b'\n')
            .ok_or_else(|| Error::Format("missing header line".into()))?;
        let header: Header = serde_json::from_slice(&bytes[..nl]).map_err(|e| Error::Format(e.to_string()))?;
        if header.dtype != DTYPE {
            return Err(Error::Format(format!("unsupported dtype `{}`", header.dtype)));
        }
        if header.names.len() != header.shapes.len() {
            return Err(Error::Format("names and shapes differ in length".into()));
        }
        let mut body = &bytes[nl + 1..];
        let mut arrays = Vec::with_capacity(header.names.len());
        for (name, shape) in header.names.into_iter().zip(header.shapes) {
            let len: usize = shape.iter().product();
            if body.len() < 8 * len {
                return Err(Error::Format(format!("truncated data for `{name}`")));
            }
            let data = body[..8 * len]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect();
            body = &body[8 * len..];
            arrays.push((name, shape, data));
        }
        if !body.is_empty() {
            return Err(Error::Format(format!("{} trailing bytes", body.len())));
        }
        Ok(Container {
            basis: header.basis,
            meta: header.meta,
            arrays,
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let bytes = self.to_bytes()?;
        std::fs::write(path.as_ref(), bytes).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let bytes = std::fs::read(path.as_ref()).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}
