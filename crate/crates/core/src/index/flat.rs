use super::kmeans::sq_dist;
use super::{top_k, AnnIndex, Hit, Stored};
use crate::{Error, Result};

/// Exact index: every vector stored verbatim and scanned per query.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatIndex {
    pub(crate) stored: Stored,
}

impl FlatIndex {
    /// Rows are reordered by ascending id so that position order is id order.
    pub fn build<S: AsRef<str>>(ids: &[S], data: &[f32], dim: usize) -> Result<Self> {
        Ok(FlatIndex {
            stored: Stored::new(ids, data, dim)?,
        })
    }

    pub fn from_vector_set(set: &crate::compose::VectorSet) -> Result<Self> {
        FlatIndex::build(set.ids(), set.as_slice(), set.dim())
    }

    pub fn vector(&self, pos: usize) -> &[f32] {
        self.stored.row(pos)
    }

    pub fn vector_by_id(&self, id: &str) -> Option<&[f32]> {
        self.stored.position(id).map(|p| self.stored.row(p))
    }
}

impl AnnIndex for FlatIndex {
    fn dim(&self) -> usize {
        self.stored.dim
    }

    fn len(&self) -> usize {
        self.stored.ids.len()
    }

    fn id(&self, pos: usize) -> &str {
        &self.stored.ids[pos]
    }

    fn position(&self, id: &str) -> Option<usize> {
        self.stored.position(id)
    }

    fn search(&self, query: &[f32], k: usize) -> Result<Vec<Hit>> {
        if query.len() != self.stored.dim {
            return Err(Error::DimensionMismatch {
                expected: self.stored.dim,
                actual: query.len(),
            });
        }
        let scored = (0..self.len()).map(|pos| Hit {
            pos,
            distance: sq_dist(query, self.stored.row(pos)),
        });
        Ok(top_k(scored, k))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn small_example_order() {
        let idx = FlatIndex::build(&["a", "b", "c"], &[1.0, 0.0, 0.0, 1.0, 0.9, 0.1], 2).unwrap();
        assert_eq!(idx.len(), 3);
        let hits = idx.search(&[1.0, 0.0], 3).unwrap();
        let ids: Vec<&str> = hits.iter().map(|h| idx.id(h.pos)).collect();
        assert_eq!(ids, ["a", "c", "b"]);
        assert_eq!(hits[0].distance, 0.0);
        assert!((hits[1].distance - 0.02).abs() < 1e-7);
        assert!((hits[2].distance - 2.0).abs() < 1e-12);
        assert_eq!(idx.search(&[1.0, 0.0], 10).unwrap().len(), 3);
        assert!(idx.search(&[1.0], 1).is_err());
    }

    #[test]
    fn empty_index() {
        let idx = FlatIndex::build::<&str>(&[], &[], 4).unwrap();
        assert!(idx.is_empty());
        assert!(idx.search(&[0.0; 4], 5).unwrap().is_empty());
    }

    #[test]
    fn build_errors() {
        assert!(matches!(
            FlatIndex::build(&["a", "a"], &[0.0, 1.0], 1),
            Err(Error::DuplicateId(_))
        ));
        assert!(FlatIndex::build(&["a", "b"], &[0.0, 1.0, 2.0], 1).is_err());
    }

    #[test]
    fn ties_break_by_id() {
        let idx = FlatIndex::build(&["z", "m", "a"], &[1.0, 1.0, 1.0], 1).unwrap();
        let hits = idx.search(&[0.0], 3).unwrap();
        let ids: Vec<&str> = hits.iter().map(|h| idx.id(h.pos)).collect();
        assert_eq!(ids, ["a", "m", "z"]);
    }

    proptest! {
        #[test]
        fn matches_full_sort_oracle(data in prop::collection::vec(-3i8..3, 40..240), q in prop::collection::vec(-3i8..3, 4), k in 0usize..70) {
            // Small integers give plenty of exact ties.
            let dim = 4;
            let data: Vec<f32> = data[..data.len() / dim * dim].iter().map(|&v| f32::from(v)).collect();
            let q: Vec<f32> = q.iter().map(|&v| f32::from(v)).collect();
            let n = data.len() / dim;
            let ids: Vec<String> = (0..n).map(|i| format!("r{:03}", (i * 37) % 1000)).collect();
            prop_assume!({ let mut s = ids.clone(); s.sort(); s.dedup(); s.len() == n });
            let idx = FlatIndex::build(&ids, &data, dim).unwrap();

            let mut oracle: Vec<(f64, &str)> = (0..n)
                .map(|i| (sq_dist(&q, &data[i * dim..(i + 1) * dim]), ids[i].as_str()))
                .collect();
            oracle.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(b.1)));
            oracle.truncate(k);

            let got: Vec<(f64, &str)> = idx.search(&q, k).unwrap().iter().map(|h| (h.distance, idx.id(h.pos))).collect();
            prop_assert_eq!(got, oracle);
        }

        #[test]
        fn stored_vectors_are_bit_exact(data in prop::collection::vec(any::<f32>().prop_filter("finite", |v| v.is_finite()), 0..60)) {
            let dim = 3;
            let data = &data[..data.len() / dim * dim];
            let n = data.len() / dim;
            let ids: Vec<String> = (0..n).map(|i| format!("{}", n - i)).collect();
            let idx = FlatIndex::build(&ids, data, dim).unwrap();
            for (i, id) in ids.iter().enumerate() {
                let got = idx.vector_by_id(id).unwrap();
                let want = &data[i * dim..(i + 1) * dim];
                prop_assert!(got.iter().zip(want).all(|(a, b)| a.to_bits() == b.to_bits()));
            }
        }
    }
}
