use std::collections::HashMap;
use std::path::Path;

use super::bytes::{ByteReader, ByteWriter};
use crate::error::{Error, Result};

pub const STORE_MAGIC: &[u8; 4] = b"AFCF";
pub const STORE_VERSION: u32 = 1;

/// Id-keyed fixed-dimension vectors, as stored in `.afcf` files.
///
/// Layout (little-endian): magic `AFCF`, version `u32`, record count `u64`,
/// dim `u32`, then per record an `u16` id length, the UTF-8 id, and `dim`
/// `f32` values.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStore {
    dim: usize,
    ids: Vec<String>,
    data: Vec<f32>,
    index: HashMap<String, usize>,
}

impl FeatureStore {
    pub fn new(dim: usize) -> Self {
        Self { dim, ids: Vec::new(), data: Vec::new(), index: HashMap::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn push(&mut self, id: impl Into<String>, values: &[f32]) -> Result<()> {
        let id = id.into();
        if values.len() != self.dim {
            return Err(Error::shape(format!("record {id} has {} values, store dim is {}", values.len(), self.dim)));
        }
        if id.len() > u16::MAX as usize {
            return Err(Error::invalid("record id longer than 65535 bytes"));
        }
        if self.index.contains_key(&id) {
            return Err(Error::invalid(format!("duplicate record id {id}")));
        }
        self.index.insert(id.clone(), self.ids.len());
        self.ids.push(id);
        self.data.extend_from_slice(values);
        Ok(())
    }

    /// Row index of `id`.
    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn get(&self, id: &str) -> Option<&[f32]> {
        self.index.get(id).map(|&i| self.row(i))
    }

    /// Like `get`, but a missing id is a data error.
    pub fn require(&self, id: &str) -> Result<&[f32]> {
        self.get(id).ok_or_else(|| Error::data(format!("id {id} not found in store")))
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn id(&self, i: usize) -> &str {
        &self.ids[i]
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f32])> {
        self.ids.iter().enumerate().map(|(i, id)| (id.as_str(), self.row(i)))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = ByteWriter::new();
        w.bytes(STORE_MAGIC);
        w.u32(STORE_VERSION);
        w.u64(self.ids.len() as u64);
        w.u32(self.dim as u32);
        for (id, row) in self.iter() {
            w.u16(id.len() as u16);
            w.bytes(id.as_bytes());
            w.f32s(row);
        }
        w.into_inner()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        if r.take(4)? != STORE_MAGIC {
            return Err(Error::format("not a feature store (bad magic)"));
        }
        let version = r.u32()?;
        if version != STORE_VERSION {
            return Err(Error::format(format!("unsupported store version {version}")));
        }
        let count = r.u64()?;
        let dim = r.u32()? as usize;
        let mut store = Self::new(dim);
        for _ in 0..count {
            let len = r.u16()? as usize;
            let id = std::str::from_utf8(r.take(len)?).map_err(|_| Error::format("record id is not UTF-8"))?.to_owned();
            let values = r.f32s(dim)?;
            store.push(id, &values).map_err(|e| Error::format(e.to_string()))?;
        }
        if !r.is_empty() {
            return Err(Error::format("trailing bytes after last record"));
        }
        Ok(store)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}
