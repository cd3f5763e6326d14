use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Handle to one named array inside a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    name: String,
    rows: usize,
    cols: usize,
    offset: usize,
}

/// Named, row-major parameter arrays backed by one contiguous buffer.
///
/// The flat buffer is the serialization and optimizer view: entries are laid
/// out in registration order, so `flatten`/`unflatten` are plain copies.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore {
    entries: Vec<Entry>,
    data: Vec<f64>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: &str, rows: usize, cols: usize, values: Vec<f64>) -> Result<ParamId> {
        if self.entries.iter().any(|e| e.name == name) {
            return Err(Error::DuplicateParam(name.to_string()));
        }
        if rows == 0 || cols == 0 || values.len() != rows * cols {
            return Err(Error::Shape {
                node: alloc::format!("param `{name}`"),
                detail: alloc::format!("{} values for a {rows}x{cols} array", values.len()),
            });
        }
        let id = ParamId(self.entries.len());
        self.entries.push(Entry { name: name.to_string(), rows, cols, offset: self.data.len() });
        self.data.extend_from_slice(&values);
        Ok(id)
    }

    pub fn zeros(&mut self, name: &str, rows: usize, cols: usize) -> Result<ParamId> {
        self.add(name, rows, cols, vec![0.0; rows * cols])
    }

    pub fn id(&self, name: &str) -> Result<ParamId> {
        self.entries
            .iter()
            .position(|e| e.name == name)
            .map(ParamId)
            .ok_or_else(|| Error::UnknownParam(name.to_string()))
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.entries[id.0].name
    }

    /// `(rows, cols)`; vectors are stored as `(len, 1)`.
    pub fn shape(&self, id: ParamId) -> (usize, usize) {
        let e = &self.entries[id.0];
        (e.rows, e.cols)
    }

    pub fn value(&self, id: ParamId) -> &[f64] {
        let e = &self.entries[id.0];
        &self.data[e.offset..e.offset + e.rows * e.cols]
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut [f64] {
        let e = &self.entries[id.0];
        &mut self.data[e.offset..e.offset + e.rows * e.cols]
    }

    pub fn set(&mut self, id: ParamId, values: &[f64]) -> Result<()> {
        let dst = self.value_mut(id);
        if dst.len() != values.len() {
            return Err(Error::Shape {
                node: alloc::format!("param #{}", id.0),
                detail: alloc::format!("expected {} values, got {}", dst.len(), values.len()),
            });
        }
        dst.copy_from_slice(values);
        Ok(())
    }

    /// Number of named arrays.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of scalar entries.
    pub fn num_values(&self) -> usize {
        self.data.len()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> + '_ {
        (0..self.entries.len()).map(ParamId)
    }

    /// Offset of `id` in the flat buffer.
    pub fn offset(&self, id: ParamId) -> usize {
        self.entries[id.0].offset
    }

    /// Maps a flat index back to `(param, index within param)`.
    pub fn locate(&self, flat: usize) -> Option<(ParamId, usize)> {
        self.entries
            .iter()
            .position(|e| flat >= e.offset && flat < e.offset + e.rows * e.cols)
            .map(|i| (ParamId(i), flat - self.entries[i].offset))
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.data.clone()
    }

    pub fn unflatten(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.data.len() {
            return Err(Error::Shape {
                node: "param store".to_string(),
                detail: alloc::format!("expected {} flat values, got {}", self.data.len(), flat.len()),
            });
        }
        self.data.copy_from_slice(flat);
        Ok(())
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn as_flat_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

/// Adjoints for every entry of a [`ParamStore`], in the store's flat layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    ranges: Vec<(usize, usize)>,
    data: Vec<f64>,
}

impl Gradients {
    pub fn zeros(store: &ParamStore) -> Self {
        Self {
            ranges: store.entries.iter().map(|e| (e.offset, e.rows * e.cols)).collect(),
            data: vec![0.0; store.data.len()],
        }
    }

    pub fn get(&self, id: ParamId) -> &[f64] {
        let (off, len) = self.ranges[id.0];
        &self.data[off..off + len]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut [f64] {
        let (off, len) = self.ranges[id.0];
        &mut self.data[off..off + len]
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn as_flat_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Elementwise `self += other`.
    pub fn accumulate(&mut self, other: &Gradients) {
        debug_assert_eq!(self.data.len(), other.data.len());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn scale(&mut self, k: f64) {
        for a in &mut self.data {
            *a *= k;
        }
    }
}
