//! Inverted file over a coarse k-means quantizer, with product-quantized
//! codes scored by asymmetric distance.
//!
//! Codes quantize the raw (zero-padded) vectors, not residuals from the
//! coarse centroid.

use rayon::prelude::*;

use super::kmeans::{kmeans, nearest, sq_dist};
use super::{sorted_order, top_k, AnnIndex, Hit};
use crate::{Error, Result};

/// Codewords per sub-quantizer; codes fit in one byte.
pub const CODEBOOK_SIZE: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IvfPqParams {
    pub nlist: usize,
    pub m: usize,
    pub nprobe: usize,
    pub kmeans_iters: usize,
    pub seed: u64,
}

impl Default for IvfPqParams {
    fn default() -> Self {
        IvfPqParams {
            nlist: 256,
            m: 16,
            nprobe: 16,
            kmeans_iters: 25,
            seed: 0,
        }
    }
}

impl IvfPqParams {
    pub fn validate(&self) -> Result<()> {
        if self.nlist == 0 || self.m == 0 {
            return Err(Error::Config("nlist and m must be at least 1".into()));
        }
        if self.nprobe == 0 || self.nprobe > self.nlist {
            return Err(Error::Config(format!(
                "nprobe must lie in 1..={}, got {}",
                self.nlist, self.nprobe
            )));
        }
        Ok(())
    }

    /// Smallest multiple of `m` that holds `dim`.
    pub fn padded_dim(&self, dim: usize) -> usize {
        dim.div_ceil(self.m) * self.m
    }

    fn sub_seed(&self, block: usize) -> u64 {
        self.seed ^ (block as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
    }
}

/// Trained coarse centroids and sub-quantizer codebooks.
#[derive(Debug, Clone, PartialEq)]
pub struct IvfPqQuantizer {
    pub(crate) dim: usize,
    pub(crate) padded_dim: usize,
    pub(crate) params: IvfPqParams,
    /// `nlist × padded_dim`.
    pub(crate) coarse: Vec<f32>,
    /// `m × CODEBOOK_SIZE × dsub`.
    pub(crate) codebooks: Vec<f32>,
}

fn pad(data: &[f32], dim: usize, padded: usize) -> Vec<f32> {
    if dim == padded {
        return data.to_vec();
    }
    let mut out = Vec::with_capacity(data.len() / dim * padded);
    for row in data.chunks_exact(dim) {
        out.extend_from_slice(row);
        out.resize(out.len() + padded - dim, 0.0);
    }
    out
}

impl IvfPqQuantizer {
    /// Train on `sample` (`n × dim`, row-major). Needs at least
    /// `max(nlist, 256)` rows.
    pub fn train(sample: &[f32], dim: usize, params: IvfPqParams) -> Result<Self> {
        params.validate()?;
        if dim == 0 || !sample.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: sample.len(),
            });
        }
        let n = sample.len() / dim;
        let needed = params.nlist.max(CODEBOOK_SIZE);
        if n < needed {
            return Err(Error::InsufficientSample { needed, got: n });
        }
        let pd = params.padded_dim(dim);
        let dsub = pd / params.m;
        let padded = pad(sample, dim, pd);

        let coarse = kmeans(&padded, pd, params.nlist, params.kmeans_iters, params.seed)?.centroids;
        let mut codebooks = Vec::with_capacity(params.m * CODEBOOK_SIZE * dsub);
        for j in 0..params.m {
            let slice: Vec<f32> = padded
                .chunks_exact(pd)
                .flat_map(|row| row[j * dsub..(j + 1) * dsub].iter().copied())
                .collect();
            let km = kmeans(&slice, dsub, CODEBOOK_SIZE, params.kmeans_iters, params.sub_seed(j))?;
            codebooks.extend_from_slice(&km.centroids);
        }
        Ok(IvfPqQuantizer {
            dim,
            padded_dim: pd,
            params,
            coarse,
            codebooks,
        })
    }

    pub fn dsub(&self) -> usize {
        self.padded_dim / self.params.m
    }

    pub fn params(&self) -> &IvfPqParams {
        &self.params
    }

    pub fn padded_dim(&self) -> usize {
        self.padded_dim
    }

    pub fn codebook(&self, block: usize) -> &[f32] {
        let size = CODEBOOK_SIZE * self.dsub();
        &self.codebooks[block * size..(block + 1) * size]
    }

    fn padded(&self, v: &[f32]) -> Result<Vec<f32>> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: v.len(),
            });
        }
        Ok(pad(v, self.dim, self.padded_dim))
    }

    /// Coarse list of `v`, lowest index on ties.
    pub fn assign(&self, v: &[f32]) -> Result<usize> {
        Ok(nearest(&self.padded(v)?, &self.coarse, self.padded_dim).0)
    }

    /// `m` codeword ids, nearest per sub-block.
    pub fn encode(&self, v: &[f32]) -> Result<Vec<u8>> {
        let v = self.padded(v)?;
        Ok(self.encode_padded(&v))
    }

    fn encode_padded(&self, v: &[f32]) -> Vec<u8> {
        let dsub = self.dsub();
        (0..self.params.m)
            .map(|j| nearest(&v[j * dsub..(j + 1) * dsub], self.codebook(j), dsub).0 as u8)
            .collect()
    }

    /// Concatenated codewords, `padded_dim` long.
    pub fn decode(&self, code: &[u8]) -> Vec<f32> {
        let dsub = self.dsub();
        code.iter()
            .enumerate()
            .flat_map(|(j, &c)| {
                let c = c as usize;
                self.codebook(j)[c * dsub..(c + 1) * dsub].iter().copied()
            })
            .collect()
    }

    /// Sum over sub-blocks of the squared distance to the chosen codeword.
    pub fn code_error(&self, v: &[f32], code: &[u8]) -> Result<f64> {
        let v = self.padded(v)?;
        let dsub = self.dsub();
        Ok(code
            .iter()
            .enumerate()
            .map(|(j, &c)| {
                let c = c as usize;
                sq_dist(&v[j * dsub..(j + 1) * dsub], &self.codebook(j)[c * dsub..(c + 1) * dsub])
            })
            .sum())
    }

    /// Per-block squared distances from the query to every codeword,
    /// `m × CODEBOOK_SIZE`.
    fn lookup_table(&self, q: &[f32]) -> Vec<f64> {
        let dsub = self.dsub();
        let mut table = Vec::with_capacity(self.params.m * CODEBOOK_SIZE);
        for j in 0..self.params.m {
            let qs = &q[j * dsub..(j + 1) * dsub];
            table.extend(self.codebook(j).chunks_exact(dsub).map(|c| sq_dist(qs, c)));
        }
        table
    }
}

/// One coarse cell: member positions and their `m`-byte codes.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct InvertedList {
    pub(crate) positions: Vec<u32>,
    pub(crate) codes: Vec<u8>,
}

impl InvertedList {
    pub fn positions(&self) -> &[u32] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IvfPqIndex {
    pub(crate) ids: Vec<String>,
    pub(crate) quantizer: IvfPqQuantizer,
    pub(crate) lists: Vec<InvertedList>,
}

impl IvfPqIndex {
    /// Train on all vectors, then add them.
    pub fn build<S: AsRef<str>>(ids: &[S], data: &[f32], dim: usize, params: IvfPqParams) -> Result<Self> {
        let quantizer = IvfPqQuantizer::train(data, dim, params)?;
        IvfPqIndex::with_quantizer(quantizer, ids, data)
    }

    pub fn from_vector_set(set: &crate::compose::VectorSet, params: IvfPqParams) -> Result<Self> {
        IvfPqIndex::build(set.ids(), set.as_slice(), set.dim(), params)
    }

    /// Encode and file every vector against an already trained quantizer.
    pub fn with_quantizer<S: AsRef<str>>(quantizer: IvfPqQuantizer, ids: &[S], data: &[f32]) -> Result<Self> {
        let dim = quantizer.dim;
        let order = sorted_order(ids, data.len(), dim)?;
        let pd = quantizer.padded_dim;
        let encoded: Vec<(usize, Vec<u8>)> = order
            .par_iter()
            .map(|&src| {
                let v = pad(&data[src * dim..(src + 1) * dim], dim, pd);
                (nearest(&v, &quantizer.coarse, pd).0, quantizer.encode_padded(&v))
            })
            .collect();
        let mut lists = vec![InvertedList::default(); quantizer.params.nlist];
        for (pos, (list, code)) in encoded.into_iter().enumerate() {
            lists[list].positions.push(pos as u32);
            lists[list].codes.extend_from_slice(&code);
        }
        Ok(IvfPqIndex {
            ids: order.iter().map(|&i| ids[i].as_ref().to_string()).collect(),
            quantizer,
            lists,
        })
    }

    pub fn quantizer(&self) -> &IvfPqQuantizer {
        &self.quantizer
    }

    pub fn params(&self) -> &IvfPqParams {
        &self.quantizer.params
    }

    pub fn lists(&self) -> &[InvertedList] {
        &self.lists
    }

    /// Probe the `nprobe` nearest cells and rank their members by
    /// asymmetric distance.
    pub fn search_nprobe(&self, query: &[f32], k: usize, nprobe: usize) -> Result<Vec<Hit>> {
        let q = self.quantizer.padded(query)?;
        let nlist = self.quantizer.params.nlist;
        if nprobe == 0 || nprobe > nlist {
            return Err(Error::Config(format!("nprobe must lie in 1..={nlist}, got {nprobe}")));
        }
        let pd = self.quantizer.padded_dim;
        let cells = top_k(
            self.quantizer
                .coarse
                .chunks_exact(pd)
                .enumerate()
                .map(|(pos, c)| Hit {
                    pos,
                    distance: sq_dist(&q, c),
                }),
            nprobe,
        );
        let table = self.quantizer.lookup_table(&q);
        let m = self.quantizer.params.m;
        let scored = cells.iter().flat_map(|cell| {
            let list = &self.lists[cell.pos];
            let table = &table;
            list.positions
                .iter()
                .zip(list.codes.chunks_exact(m))
                .map(move |(&pos, code)| Hit {
                    pos: pos as usize,
                    distance: code
                        .iter()
                        .enumerate()
                        .map(|(j, &c)| table[j * CODEBOOK_SIZE + c as usize])
                        .sum(),
                })
        });
        Ok(top_k(scored, k))
    }
}

impl AnnIndex for IvfPqIndex {
    fn dim(&self) -> usize {
        self.quantizer.dim
    }

    fn len(&self) -> usize {
        self.ids.len()
    }

    fn id(&self, pos: usize) -> &str {
        &self.ids[pos]
    }

    fn position(&self, id: &str) -> Option<usize> {
        self.ids.binary_search_by(|p| p.as_str().cmp(id)).ok()
    }

    fn search(&self, query: &[f32], k: usize) -> Result<Vec<Hit>> {
        self.search_nprobe(query, k, self.quantizer.params.nprobe)
    }
}
