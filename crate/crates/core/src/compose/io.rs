//! Vectorized corpus files.
//!
//! Binary layout, all integers little-endian:
//!
//! ```text
//! magic "JVEC" | version u32 | count u64 | dim u32
//! count x ( id_len u32 | id bytes (UTF-8) | dim x f32 )
//! ```

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::JobVector;
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"JVEC";
const VERSION: u32 = 1;

/// Ids with their composed vectors stored as `f32` rows.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorSet {
    dim: usize,
    ids: Vec<String>,
    data: Vec<f32>,
}

impl VectorSet {
    pub fn new(dim: usize) -> Self {
        VectorSet {
            dim,
            ids: Vec::new(),
            data: Vec::new(),
        }
    }

    pub fn from_job_vectors<S: AsRef<str>>(ids: &[S], vectors: &[JobVector]) -> Result<Self> {
        let dim = vectors.first().map_or(0, JobVector::dim);
        if ids.len() != vectors.len() {
            return Err(Error::DimensionMismatch {
                expected: ids.len(),
                actual: vectors.len(),
            });
        }
        let mut set = VectorSet::new(dim);
        for (id, v) in ids.iter().zip(vectors) {
            let row: Vec<f32> = v.full().iter().map(|&x| x as f32).collect();
            set.push(id.as_ref(), &row)?;
        }
        Ok(set)
    }

    pub fn push(&mut self, id: &str, vector: &[f32]) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: vector.len(),
            });
        }
        self.ids.push(id.to_string());
        self.data.extend_from_slice(vector);
        Ok(())
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

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn id(&self, i: usize) -> &str {
        &self.ids[i]
    }

    pub fn vector(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn positions_by_id(&self) -> HashMap<&str, usize> {
        self.ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect()
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_u32::<LittleEndian>(VERSION)?;
        w.write_u64::<LittleEndian>(self.len() as u64)?;
        w.write_u32::<LittleEndian>(self.dim as u32)?;
        for (i, id) in self.ids.iter().enumerate() {
            w.write_u32::<LittleEndian>(id.len() as u32)?;
            w.write_all(id.as_bytes())?;
            for &v in self.vector(i) {
                w.write_f32::<LittleEndian>(v)?;
            }
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("not a vectorized corpus file".into()));
        }
        let version = r.read_u32::<LittleEndian>()?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported vector file version {version}")));
        }
        let count = r.read_u64::<LittleEndian>()? as usize;
        let dim = r.read_u32::<LittleEndian>()? as usize;
        let mut set = VectorSet::new(dim);
        let mut row = vec![0f32; dim];
        for _ in 0..count {
            let len = r.read_u32::<LittleEndian>()? as usize;
            let mut id = vec![0u8; len];
            r.read_exact(&mut id)?;
            let id = String::from_utf8(id).map_err(|e| Error::Format(e.to_string()))?;
            r.read_f32_into::<LittleEndian>(&mut row)?;
            set.push(&id, &row)?;
        }
        Ok(set)
    }

    /// `count dim` header, then `id v1 ... vdim` with 9 significant digits.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{} {}", self.len(), self.dim)?;
        for (i, id) in self.ids.iter().enumerate() {
            w.write_all(id.as_bytes())?;
            for v in self.vector(i) {
                write!(w, " {v:.8e}")?;
            }
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_binary(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        VectorSet::read_binary(BufReader::new(File::open(path)?))
    }
}
