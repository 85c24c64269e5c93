//! k-means++ seeding followed by Lloyd iterations.

use rand::Rng;
use rayon::prelude::*;

use crate::rng::stream_rng;
use crate::{Error, Result};

/// Centroids (row-major, `k × dim`) and the objective after every assignment
/// step. `objective[0]` is the cost of the seeding, the last entry the cost of
/// the returned centroids.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    pub k: usize,
    pub dim: usize,
    pub centroids: Vec<f32>,
    pub objective: Vec<f64>,
}

impl KMeans {
    pub fn centroid(&self, c: usize) -> &[f32] {
        &self.centroids[c * self.dim..(c + 1) * self.dim]
    }
}

pub(crate) fn sq_dist(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = f64::from(x) - f64::from(y);
            d * d
        })
        .sum()
}

fn sq_dist_f64(a: &[f32], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = f64::from(x) - y;
            d * d
        })
        .sum()
}

/// Nearest row of `centroids` to `v`, lowest index on ties.
pub(crate) fn nearest(v: &[f32], centroids: &[f32], dim: usize) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, row) in centroids.chunks_exact(dim).enumerate() {
        let d = sq_dist(v, row);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn nearest_f64(v: &[f32], centroids: &[f64], dim: usize) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, row) in centroids.chunks_exact(dim).enumerate() {
        let d = sq_dist_f64(v, row);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// Cluster the `n = points.len() / dim` rows of `points` into `k` groups.
///
/// Lloyd stops early once assignments no longer change. Clusters that lose
/// all their points are re-seeded with the point farthest from its centroid.
/// Assignment runs in parallel; every reduction is sequential in point order,
/// so the result depends only on the inputs and `seed`.
pub fn kmeans(points: &[f32], dim: usize, k: usize, iters: usize, seed: u64) -> Result<KMeans> {
    if dim == 0 || !points.len().is_multiple_of(dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: points.len(),
        });
    }
    let n = points.len() / dim;
    if k == 0 {
        return Err(Error::Config("k-means needs k >= 1".into()));
    }
    if n < k {
        return Err(Error::InsufficientSample { needed: k, got: n });
    }
    let row = |i: usize| &points[i * dim..(i + 1) * dim];

    let mut centroids = seed_plus_plus(points, dim, k, seed);
    let mut assign: Vec<(usize, f64)> = (0..n)
        .into_par_iter()
        .map(|i| nearest_f64(row(i), &centroids, dim))
        .collect();
    let mut objective = vec![assign.iter().map(|a| a.1).sum::<f64>()];

    for _ in 0..iters {
        let mut sums = vec![0.0f64; k * dim];
        let mut counts = vec![0usize; k];
        for (i, &(c, _)) in assign.iter().enumerate() {
            counts[c] += 1;
            for (s, &v) in sums[c * dim..(c + 1) * dim].iter_mut().zip(row(i)) {
                *s += f64::from(v);
            }
        }
        let mut taken = vec![false; n];
        for c in 0..k {
            let target = &mut centroids[c * dim..(c + 1) * dim];
            if counts[c] > 0 {
                let inv = counts[c] as f64;
                for (t, s) in target.iter_mut().zip(&sums[c * dim..(c + 1) * dim]) {
                    *t = s / inv;
                }
                continue;
            }
            // Farthest point not already used to re-seed in this step.
            let far = (0..n)
                .filter(|&i| !taken[i])
                .fold(None, |best: Option<(usize, f64)>, i| match best {
                    Some((_, d)) if d >= assign[i].1 => best,
                    _ => Some((i, assign[i].1)),
                });
            if let Some((i, _)) = far {
                taken[i] = true;
                for (t, &v) in target.iter_mut().zip(row(i)) {
                    *t = f64::from(v);
                }
            }
        }

        let next: Vec<(usize, f64)> = (0..n)
            .into_par_iter()
            .map(|i| nearest_f64(row(i), &centroids, dim))
            .collect();
        let unchanged = next.iter().zip(&assign).all(|(a, b)| a.0 == b.0);
        objective.push(next.iter().map(|a| a.1).sum());
        assign = next;
        if unchanged {
            break;
        }
    }

    Ok(KMeans {
        k,
        dim,
        centroids: centroids.iter().map(|&v| v as f32).collect(),
        objective,
    })
}

/// D²-weighted seeding. When every remaining point coincides with a chosen
/// centroid the next seed is drawn uniformly.
fn seed_plus_plus(points: &[f32], dim: usize, k: usize, seed: u64) -> Vec<f64> {
    let n = points.len() / dim;
    let row = |i: usize| &points[i * dim..(i + 1) * dim];
    let mut rng = stream_rng(seed, 0);
    let mut centroids = Vec::with_capacity(k * dim);
    let first = rng.random_range(0..n);
    centroids.extend(row(first).iter().map(|&v| f64::from(v)));
    let mut min_d: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| sq_dist_f64(row(i), &centroids[..dim]))
        .collect();

    for c in 1..k {
        let total: f64 = min_d.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in min_d.iter().enumerate() {
                if d > 0.0 && target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            // Guard against rounding running past the last positive weight.
            if min_d[chosen] == 0.0 {
                chosen = min_d.iter().rposition(|&d| d > 0.0).unwrap_or(chosen);
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centroids.extend(row(pick).iter().map(|&v| f64::from(v)));
        let new = &centroids[c * dim..(c + 1) * dim];
        min_d.par_iter_mut().enumerate().for_each(|(i, d)| {
            let nd = sq_dist_f64(row(i), new);
            if nd < *d {
                *d = nd;
            }
        });
    }
    centroids
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn separated_blobs() {
        let pts = [0.0f32, 0.1, 10.0, 10.1];
        for seed in 0..20 {
            let km = kmeans(&pts, 1, 2, 20, seed).unwrap();
            let mut c = km.centroids.clone();
            c.sort_by(f32::total_cmp);
            assert!((c[0] - 0.05).abs() < 1e-6 && (c[1] - 10.05).abs() < 1e-6, "{c:?}");
        }
    }

    #[test]
    fn one_point_per_cluster() {
        let pts = [1.0f32, 2.0, -3.0, 0.5, 7.0, 7.0];
        let km = kmeans(&pts, 2, 3, 10, 3).unwrap();
        assert_eq!(*km.objective.last().unwrap(), 0.0);
        let mut got: Vec<&[f32]> = km.centroids.chunks(2).collect();
        got.sort_by(|a, b| a[0].total_cmp(&b[0]));
        assert_eq!(got, vec![&[-3.0f32, 0.5][..], &[1.0, 2.0], &[7.0, 7.0]]);
    }

    #[test]
    fn too_few_points() {
        assert!(matches!(
            kmeans(&[1.0, 2.0], 1, 3, 5, 0),
            Err(Error::InsufficientSample { needed: 3, got: 2 })
        ));
        assert!(kmeans(&[1.0, 2.0, 3.0], 2, 1, 5, 0).is_err());
        assert!(kmeans(&[1.0], 1, 0, 5, 0).is_err());
    }

    #[test]
    fn duplicate_points_do_not_break_seeding() {
        let pts = vec![4.0f32; 30];
        let km = kmeans(&pts, 3, 5, 5, 9).unwrap();
        assert!(km.centroids.iter().all(|&v| v == 4.0));
        assert_eq!(*km.objective.last().unwrap(), 0.0);
    }

    proptest! {
        #[test]
        fn objective_never_increases(pts in prop::collection::vec(-50.0f32..50.0, 60..300), k in 1usize..8, seed in 0u64..1000) {
            let dim = 3;
            let pts = &pts[..pts.len() / dim * dim];
            prop_assume!(pts.len() / dim >= k);
            let km = kmeans(pts, dim, k, 30, seed).unwrap();
            for w in km.objective.windows(2) {
                prop_assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-12, "{:?}", km.objective);
            }
        }

        #[test]
        fn deterministic_given_seed(pts in prop::collection::vec(-5.0f32..5.0, 40..120), seed in 0u64..100) {
            let pts = &pts[..pts.len() / 2 * 2];
            prop_assert_eq!(kmeans(pts, 2, 4, 10, seed).unwrap(), kmeans(pts, 2, 4, 10, seed).unwrap());
        }
    }
}
