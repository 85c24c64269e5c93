//! Nearest-neighbour indexes over composed job vectors.
//!
//! Both indexes use squared L2 and store their rows sorted by id, so a hit's
//! position doubles as the id tie-break.
//!
//! Persisted layout, little-endian:
//!
//! ```text
//! magic "JVIX" | version u32 | kind u8 (0 flat, 1 ivfpq) | dim u32 | count u64
//! nlist u32 | m u32 | nprobe u32 | kmeans_iters u32 | seed u64   (zero for flat)
//! count x ( id_len u32 | id bytes )
//! flat:  count x dim f32
//! ivfpq: nlist x padded_dim f32 | m x 256 x dsub f32
//!        nlist x ( len u32 | len x position u32 | len x m code bytes )
//! ```

mod flat;
mod ivfpq;
pub mod kmeans;

use std::cmp::Ordering;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::{Error, Result};

pub use flat::FlatIndex;
pub use ivfpq::{InvertedList, IvfPqIndex, IvfPqParams, IvfPqQuantizer, CODEBOOK_SIZE};
pub use kmeans::{kmeans, KMeans};

/// A search result row: index position and squared distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub pos: usize,
    pub distance: f64,
}

fn hit_order(a: &Hit, b: &Hit) -> Ordering {
    a.distance.total_cmp(&b.distance).then(a.pos.cmp(&b.pos))
}

/// The `k` smallest hits, ascending by distance then position.
pub(crate) fn top_k(hits: impl Iterator<Item = Hit>, k: usize) -> Vec<Hit> {
    let mut all: Vec<Hit> = hits.collect();
    if k < all.len() {
        if k == 0 {
            return Vec::new();
        }
        all.select_nth_unstable_by(k - 1, hit_order);
        all.truncate(k);
    }
    all.sort_unstable_by(hit_order);
    all
}

/// Read-only nearest-neighbour search over stored rows.
pub trait AnnIndex: Send + Sync {
    fn dim(&self) -> usize;
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    fn id(&self, pos: usize) -> &str;
    fn position(&self, id: &str) -> Option<usize>;
    /// Up to `k` hits, ascending distance, ties by ascending id.
    fn search(&self, query: &[f32], k: usize) -> Result<Vec<Hit>>;
}

/// Permutation that sorts `ids`, after checking uniqueness and row count.
pub(crate) fn sorted_order<S: AsRef<str>>(ids: &[S], data_len: usize, dim: usize) -> Result<Vec<usize>> {
    if dim == 0 || data_len != ids.len() * dim {
        return Err(Error::DimensionMismatch {
            expected: ids.len() * dim,
            actual: data_len,
        });
    }
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.sort_by(|&a, &b| ids[a].as_ref().cmp(ids[b].as_ref()));
    for w in order.windows(2) {
        if ids[w[0]].as_ref() == ids[w[1]].as_ref() {
            return Err(Error::DuplicateId(ids[w[0]].as_ref().to_string()));
        }
    }
    Ok(order)
}

/// Ids sorted ascending with their rows.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Stored {
    pub(crate) dim: usize,
    pub(crate) ids: Vec<String>,
    pub(crate) data: Vec<f32>,
}

impl Stored {
    fn new<S: AsRef<str>>(ids: &[S], data: &[f32], dim: usize) -> Result<Self> {
        let order = sorted_order(ids, data.len(), dim)?;
        let mut sorted = Vec::with_capacity(data.len());
        for &i in &order {
            sorted.extend_from_slice(&data[i * dim..(i + 1) * dim]);
        }
        Ok(Stored {
            dim,
            ids: order.iter().map(|&i| ids[i].as_ref().to_string()).collect(),
            data: sorted,
        })
    }

    fn row(&self, pos: usize) -> &[f32] {
        &self.data[pos * self.dim..(pos + 1) * self.dim]
    }

    fn position(&self, id: &str) -> Option<usize> {
        self.ids.binary_search_by(|p| p.as_str().cmp(id)).ok()
    }
}

const MAGIC: &[u8; 4] = b"JVIX";
const VERSION: u32 = 1;

/// Either index kind, as persisted on disk.
#[derive(Debug, Clone, PartialEq)]
pub enum Index {
    Flat(FlatIndex),
    IvfPq(IvfPqIndex),
}

impl Index {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Index::Flat(_) => "flat",
            Index::IvfPq(_) => "ivfpq",
        }
    }

    pub fn as_ann(&self) -> &dyn AnnIndex {
        match self {
            Index::Flat(i) => i,
            Index::IvfPq(i) => i,
        }
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        let ann = self.as_ann();
        w.write_all(MAGIC)?;
        w.write_u32::<LittleEndian>(VERSION)?;
        w.write_u8(match self {
            Index::Flat(_) => 0,
            Index::IvfPq(_) => 1,
        })?;
        w.write_u32::<LittleEndian>(ann.dim() as u32)?;
        w.write_u64::<LittleEndian>(ann.len() as u64)?;
        let p = match self {
            Index::Flat(_) => IvfPqParams {
                nlist: 0,
                m: 0,
                nprobe: 0,
                kmeans_iters: 0,
                seed: 0,
            },
            Index::IvfPq(i) => *i.params(),
        };
        for v in [p.nlist, p.m, p.nprobe, p.kmeans_iters] {
            w.write_u32::<LittleEndian>(v as u32)?;
        }
        w.write_u64::<LittleEndian>(p.seed)?;
        for pos in 0..ann.len() {
            let id = ann.id(pos);
            w.write_u32::<LittleEndian>(id.len() as u32)?;
            w.write_all(id.as_bytes())?;
        }
        match self {
            Index::Flat(i) => write_f32s(&mut w, &i.stored.data)?,
            Index::IvfPq(i) => {
                write_f32s(&mut w, &i.quantizer.coarse)?;
                write_f32s(&mut w, &i.quantizer.codebooks)?;
                for list in &i.lists {
                    w.write_u32::<LittleEndian>(list.positions.len() as u32)?;
                    for &pos in &list.positions {
                        w.write_u32::<LittleEndian>(pos)?;
                    }
                    w.write_all(&list.codes)?;
                }
            }
        }
        Ok(())
    }

    pub fn read<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("not an index file".into()));
        }
        let version = r.read_u32::<LittleEndian>()?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported index version {version}")));
        }
        let kind = r.read_u8()?;
        let dim = r.read_u32::<LittleEndian>()? as usize;
        let count = r.read_u64::<LittleEndian>()? as usize;
        let mut p = [0usize; 4];
        for v in &mut p {
            *v = r.read_u32::<LittleEndian>()? as usize;
        }
        let params = IvfPqParams {
            nlist: p[0],
            m: p[1],
            nprobe: p[2],
            kmeans_iters: p[3],
            seed: r.read_u64::<LittleEndian>()?,
        };
        let mut ids = Vec::with_capacity(count.min(1 << 24));
        for _ in 0..count {
            let len = r.read_u32::<LittleEndian>()? as usize;
            let mut bytes = vec![0u8; len];
            r.read_exact(&mut bytes)?;
            ids.push(String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))?);
        }
        if ids.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Format("index ids are not strictly ascending".into()));
        }
        match kind {
            0 => {
                if dim == 0 {
                    return Err(Error::Format("zero dimension".into()));
                }
                let data = read_f32s(&mut r, count * dim)?;
                Ok(Index::Flat(FlatIndex {
                    stored: Stored { dim, ids, data },
                }))
            }
            1 => {
                params
                    .validate()
                    .map_err(|e| Error::Format(format!("bad index parameters: {e}")))?;
                if dim == 0 {
                    return Err(Error::Format("zero dimension".into()));
                }
                let padded_dim = params.padded_dim(dim);
                let coarse = read_f32s(&mut r, params.nlist * padded_dim)?;
                let codebooks = read_f32s(&mut r, padded_dim * CODEBOOK_SIZE)?;
                let mut lists = Vec::with_capacity(params.nlist);
                let mut seen = vec![false; count];
                for _ in 0..params.nlist {
                    let len = r.read_u32::<LittleEndian>()? as usize;
                    let mut positions = Vec::with_capacity(len.min(count));
                    for _ in 0..len {
                        let pos = r.read_u32::<LittleEndian>()?;
                        match seen.get_mut(pos as usize) {
                            Some(s) if !*s => *s = true,
                            _ => return Err(Error::Format(format!("bad list entry {pos}"))),
                        }
                        positions.push(pos);
                    }
                    let mut codes = vec![0u8; len * params.m];
                    r.read_exact(&mut codes)?;
                    lists.push(InvertedList { positions, codes });
                }
                if seen.iter().any(|s| !s) {
                    return Err(Error::Format("inverted lists do not cover every id".into()));
                }
                Ok(Index::IvfPq(IvfPqIndex {
                    ids,
                    quantizer: IvfPqQuantizer {
                        dim,
                        padded_dim,
                        params,
                        coarse,
                        codebooks,
                    },
                    lists,
                }))
            }
            other => Err(Error::Format(format!("unknown index kind {other}"))),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Index::read(BufReader::new(File::open(path)?))
    }
}

fn write_f32s<W: Write>(w: &mut W, values: &[f32]) -> Result<()> {
    for &v in values {
        w.write_f32::<LittleEndian>(v)?;
    }
    Ok(())
}

fn read_f32s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f32>> {
    let mut out = vec![0f32; n];
    r.read_f32_into::<LittleEndian>(&mut out)?;
    Ok(out)
}

/// Fraction of the exact top-`k` matched by `approx`.
///
/// An approximate hit counts when its exact distance is no larger than the
/// exact `k`-th distance, so ties among equidistant rows are not penalized.
/// `exact_distance` maps a position to its exact distance from the query.
pub fn recall_at_k(exact: &[Hit], approx: &[Hit], k: usize, exact_distance: impl Fn(usize) -> f64) -> f64 {
    let k = k.min(exact.len());
    if k == 0 {
        return 1.0;
    }
    let cutoff = exact[k - 1].distance;
    let found = approx
        .iter()
        .take(k)
        .filter(|h| exact_distance(h.pos) <= cutoff)
        .count();
    found as f64 / k as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use rand::Rng;

    fn dataset(n: usize, dim: usize) -> (Vec<String>, Vec<f32>) {
        let mut rng = stream_rng(21, 0);
        let ids = (0..n).map(|i| format!("p{:04}", (i * 7919) % 10007)).collect();
        let data = (0..n * dim).map(|_| rng.random_range(-1.0f32..1.0)).collect();
        (ids, data)
    }

    #[test]
    fn top_k_orders_and_truncates() {
        let hits = [(3, 1.0), (1, 0.5), (0, 1.0), (2, 0.1)].map(|(pos, distance)| Hit { pos, distance });
        let got: Vec<usize> = top_k(hits.iter().copied(), 3).iter().map(|h| h.pos).collect();
        assert_eq!(got, [2, 1, 0]);
        assert!(top_k(hits.iter().copied(), 0).is_empty());
        assert_eq!(top_k(hits.iter().copied(), 9).len(), 4);
    }

    #[test]
    fn flat_round_trip() {
        let (ids, data) = dataset(200, 5);
        let idx = Index::Flat(FlatIndex::build(&ids, &data, 5).unwrap());
        let mut buf = Vec::new();
        idx.write(&mut buf).unwrap();
        let back = Index::read(buf.as_slice()).unwrap();
        assert_eq!(back, idx);
        let mut again = Vec::new();
        back.write(&mut again).unwrap();
        assert_eq!(again, buf);
    }

    #[test]
    fn ivfpq_round_trip_and_deterministic_bytes() {
        let (ids, data) = dataset(600, 7);
        let params = IvfPqParams {
            nlist: 10,
            m: 4,
            nprobe: 3,
            kmeans_iters: 5,
            seed: 77,
        };
        let build = || Index::IvfPq(IvfPqIndex::build(&ids, &data, 7, params).unwrap());
        let mut a = Vec::new();
        build().write(&mut a).unwrap();
        let mut b = Vec::new();
        build().write(&mut b).unwrap();
        assert_eq!(a, b);
        let back = Index::read(a.as_slice()).unwrap();
        assert_eq!(back, build());
        for q in data.chunks_exact(7).take(10) {
            assert_eq!(back.as_ann().search(q, 20).unwrap(), build().as_ann().search(q, 20).unwrap());
        }
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let (ids, data) = dataset(10, 2);
        let mut buf = Vec::new();
        Index::Flat(FlatIndex::build(&ids, &data, 2).unwrap()).write(&mut buf).unwrap();
        assert!(Index::read(&buf[..buf.len() - 1]).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(Index::read(bad.as_slice()).is_err());
        let mut bad = buf.clone();
        bad[8] = 9;
        assert!(Index::read(bad.as_slice()).is_err());
    }

    #[test]
    fn recall_counts_ties_as_hits() {
        let h = |pos, distance| Hit { pos, distance };
        let exact = [h(0, 1.0), h(1, 2.0), h(2, 2.0)];
        let dist = |p: usize| [1.0, 2.0, 2.0, 2.0, 5.0][p];
        assert_eq!(recall_at_k(&exact, &[h(0, 0.9), h(3, 1.9)], 2, dist), 1.0);
        assert_eq!(recall_at_k(&exact, &[h(4, 0.1), h(0, 0.2)], 2, dist), 0.5);
        assert_eq!(recall_at_k(&[], &[], 5, dist), 1.0);
    }
}
