//! Latent vectors, embedding collections and the SMEB container.
//!
//! SMEB layout, all integers little-endian:
//!
//! ```text
//! "SMEB" | version u16 = 1 | flags u16 (bit0 = names) | dim u32 | count u64
//!        | [names: count x (len u16, utf-8 bytes)]
//!        | data: count x dim f32, item-major
//! ```

use std::io::{Read, Write};

use crate::wire::{self, CountingWriter};
use crate::{Error, Result};

pub const SMEB_MAGIC: &[u8; 4] = b"SMEB";
pub const SMEB_VERSION: u16 = 1;
pub const SMEB_HEADER_BYTES: u64 = 20;

const FLAG_NAMES: u16 = 1;

/// One embedding. Arithmetic runs in `f64`; storage is `f32`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentVector {
    values: Vec<f64>,
}

impl LatentVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter("latent dimension must be >= 1".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("latent vector"));
        }
        Ok(Self { values })
    }

    /// Zero vector of dimension `dim`.
    pub fn zeros(dim: usize) -> Result<Self> {
        Self::new(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn norm(&self) -> f64 {
        norm(&self.values)
    }

    pub fn dot(&self, other: &LatentVector) -> Result<f64> {
        check_dim(self.dim(), other.dim())?;
        Ok(dot(&self.values, &other.values))
    }
}

impl AsRef<[f64]> for LatentVector {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

/// `count` vectors of dimension `dim`, stored item-major, plus optional labels.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingCollection {
    dim: usize,
    data: Vec<f32>,
    names: Option<Vec<String>>,
}

impl EmbeddingCollection {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 || dim > u32::MAX as usize {
            return Err(Error::InvalidParameter(format!("invalid dimension {dim}")));
        }
        Ok(Self {
            dim,
            data: Vec::new(),
            names: None,
        })
    }

    /// Builds a collection from row-major `f32` data.
    pub fn from_flat(dim: usize, data: Vec<f32>) -> Result<Self> {
        let mut c = Self::new(dim)?;
        if !data.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: data.len() % dim,
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("embedding data"));
        }
        c.data = data;
        Ok(c)
    }

    /// Values are rounded to `f32` on the way in.
    pub fn from_vectors<'a>(dim: usize, items: impl IntoIterator<Item = &'a LatentVector>) -> Result<Self> {
        let mut c = Self::new(dim)?;
        for v in items {
            c.push(v)?;
        }
        Ok(c)
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.len() {
            return Err(Error::InvalidParameter(format!(
                "{} names for {} items",
                names.len(),
                self.len()
            )));
        }
        if let Some(long) = names.iter().find(|n| n.len() > u16::MAX as usize) {
            return Err(Error::InvalidParameter(format!("name of {} bytes is too long", long.len())));
        }
        self.names = Some(names);
        Ok(self)
    }

    pub fn push(&mut self, v: &LatentVector) -> Result<()> {
        check_dim(self.dim, v.dim())?;
        if self.names.is_some() {
            return Err(Error::InvalidParameter("use push_named on a named collection".into()));
        }
        self.data.extend(v.values().iter().map(|&x| x as f32));
        Ok(())
    }

    pub fn push_named(&mut self, v: &LatentVector, name: String) -> Result<()> {
        check_dim(self.dim, v.dim())?;
        if name.len() > u16::MAX as usize {
            return Err(Error::InvalidParameter("name too long".into()));
        }
        if self.names.is_none() {
            if !self.is_empty() {
                return Err(Error::InvalidParameter("collection has unnamed items".into()));
            }
            self.names = Some(Vec::new());
        }
        self.data.extend(v.values().iter().map(|&x| x as f32));
        self.names.as_mut().expect("names present").push(name);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn names(&self) -> Option<&[String]> {
        self.names.as_deref()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f32]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn item(&self, i: usize) -> Result<LatentVector> {
        if i >= self.len() {
            return Err(Error::IndexOutOfRange {
                index: i as u64,
                len: self.len() as u64,
            });
        }
        Ok(LatentVector {
            values: self.row(i).iter().map(|&x| x as f64).collect(),
        })
    }

    pub fn items(&self) -> impl ExactSizeIterator<Item = LatentVector> + '_ {
        self.rows().map(|r| LatentVector {
            values: r.iter().map(|&x| x as f64).collect(),
        })
    }

    pub fn as_flat(&self) -> &[f32] {
        &self.data
    }

    /// First `count` items (names carried along).
    pub fn head(&self, count: usize) -> Self {
        let count = count.min(self.len());
        Self {
            dim: self.dim,
            data: self.data[..count * self.dim].to_vec(),
            names: self.names.as_ref().map(|n| n[..count].to_vec()),
        }
    }

    /// Exact SMEB size for this collection.
    pub fn encoded_len(&self) -> u64 {
        smeb_size(self.dim, self.len(), self.names.as_deref())
    }
}

/// Size in bytes of an SMEB file with the given shape.
pub fn smeb_size(dim: usize, count: usize, names: Option<&[String]>) -> u64 {
    let names_bytes: u64 = names
        .map(|ns| ns.iter().map(|n| 2 + n.len() as u64).sum())
        .unwrap_or(0);
    SMEB_HEADER_BYTES + names_bytes + 4 * dim as u64 * count as u64
}

/// Writes `collection` as SMEB and returns the number of bytes written.
///
/// Nothing reaches the sink if the data holds a non-finite value.
pub fn write_embeddings(collection: &EmbeddingCollection, sink: impl Write) -> Result<u64> {
    if collection.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("embedding data"));
    }
    let mut w = CountingWriter::new(sink);
    let flags = if collection.names.is_some() { FLAG_NAMES } else { 0 };
    w.write_all(SMEB_MAGIC)?;
    w.write_all(&SMEB_VERSION.to_le_bytes())?;
    w.write_all(&flags.to_le_bytes())?;
    w.write_all(&(collection.dim as u32).to_le_bytes())?;
    w.write_all(&(collection.len() as u64).to_le_bytes())?;
    if let Some(names) = &collection.names {
        for name in names {
            w.write_all(&(name.len() as u16).to_le_bytes())?;
            w.write_all(name.as_bytes())?;
        }
    }
    let mut buf = Vec::with_capacity(collection.dim * 4);
    for row in collection.rows() {
        buf.clear();
        for v in row {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    w.flush()?;
    Ok(w.written)
}

pub fn read_embeddings(mut source: impl Read) -> Result<EmbeddingCollection> {
    let r = &mut source;
    wire::expect_magic(r, SMEB_MAGIC)?;
    wire::expect_version(r, SMEB_VERSION)?;
    let flags = wire::read_u16(r)?;
    if flags & !FLAG_NAMES != 0 {
        return Err(Error::Format(format!("unknown SMEB flags {flags:#06x}")));
    }
    let dim = wire::read_u32(r)? as usize;
    if dim == 0 {
        return Err(Error::Format("SMEB dimension is zero".into()));
    }
    let count = wire::read_u64(r)?;
    let count = usize::try_from(count).map_err(|_| Error::Format("item count too large".into()))?;
    let names = if flags & FLAG_NAMES != 0 {
        let mut names = Vec::with_capacity(count.min(1 << 16));
        for _ in 0..count {
            let len = wire::read_u16(r)? as usize;
            let bytes = wire::read_vec(r, len)?;
            let name = String::from_utf8(bytes).map_err(|e| Error::Format(format!("item name: {e}")))?;
            names.push(name);
        }
        Some(names)
    } else {
        None
    };
    let byte_len = count
        .checked_mul(dim)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::Format("payload size overflows".into()))?;
    let bytes = wire::read_vec(r, byte_len)?;
    let data: Vec<f32> = bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("embedding data"));
    }
    Ok(EmbeddingCollection { dim, data, names })
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
