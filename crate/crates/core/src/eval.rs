//! Recommendation quality: distance to the query, in-range counts, title
//! match and title coverage, pooled over every (query, item) pair.

use std::collections::HashMap;
use std::io::Write;

use rand::seq::index::sample;
use rayon::prelude::*;

use crate::compose::VectorSet;
use crate::corpus::JobPosting;
use crate::geo::haversine_miles;
use crate::index::AnnIndex;
use crate::rng::stream_rng;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RecommendedItem {
    pub posting_id: String,
    pub distance: f64,
    pub geo_miles: f64,
    pub title_match: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecommendationSet {
    pub query_id: String,
    pub items: Vec<RecommendedItem>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceStats {
    pub avg: f64,
    pub median: f64,
    pub std: f64,
}

fn pooled(sets: &[RecommendationSet]) -> impl Iterator<Item = &RecommendedItem> {
    sets.iter().flat_map(|s| s.items.iter())
}

fn item_count(sets: &[RecommendationSet]) -> Result<usize> {
    let n = pooled(sets).count();
    if n == 0 {
        return Err(Error::Empty("recommendations"));
    }
    Ok(n)
}

/// Lower middle for even counts.
fn lower_median(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    values[(values.len() - 1) / 2]
}

/// Mean, lower median and population standard deviation of all item miles.
pub fn distance_stats(sets: &[RecommendationSet]) -> Result<DistanceStats> {
    let n = item_count(sets)? as f64;
    let miles: Vec<f64> = pooled(sets).map(|i| i.geo_miles).collect();
    let avg = miles.iter().sum::<f64>() / n;
    let var = miles.iter().map(|m| (m - avg).powi(2)).sum::<f64>() / n;
    Ok(DistanceStats {
        avg,
        median: lower_median(miles),
        std: var.sqrt(),
    })
}

pub fn in_range_count(set: &RecommendationSet, radius_miles: f64) -> usize {
    set.items.iter().filter(|i| i.geo_miles <= radius_miles).count()
}

pub fn title_match_rate(sets: &[RecommendationSet]) -> Result<f64> {
    let n = item_count(sets)?;
    let matched = pooled(sets).filter(|i| i.title_match).count();
    Ok(100.0 * matched as f64 / n as f64)
}

/// Percentage of items that match the query title and lie within the radius.
pub fn title_coverage(sets: &[RecommendationSet], radius_miles: f64) -> Result<f64> {
    let n = item_count(sets)?;
    let covered = pooled(sets)
        .filter(|i| i.title_match && i.geo_miles <= radius_miles)
        .count();
    Ok(100.0 * covered as f64 / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalConfig {
    pub k: usize,
    /// Number of sampled queries; all postings when at least the corpus size.
    pub queries: usize,
    pub radius_miles: f64,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            k: 50,
            queries: 500,
            radius_miles: 50.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryBreakdown {
    pub query_id: String,
    pub items: usize,
    pub distance_avg: f64,
    pub in_range: usize,
    pub title_match_pct: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub k: usize,
    pub radius_miles: f64,
    pub queries: usize,
    pub items: usize,
    pub distance_avg: f64,
    pub distance_median: f64,
    pub distance_std: f64,
    pub in_range_avg: f64,
    pub in_range_median: f64,
    pub title_match_pct: f64,
    pub coverage_pct: f64,
    /// No query produced a single recommendation; every metric is zero.
    pub degenerate: bool,
    pub per_query: Vec<QueryBreakdown>,
}

impl EvalReport {
    pub fn from_sets(sets: &[RecommendationSet], k: usize, radius_miles: f64) -> Result<Self> {
        let per_query: Vec<QueryBreakdown> = sets
            .iter()
            .map(|s| {
                let n = s.items.len();
                let per = |v: f64| if n == 0 { 0.0 } else { v / n as f64 };
                QueryBreakdown {
                    query_id: s.query_id.clone(),
                    items: n,
                    distance_avg: per(s.items.iter().map(|i| i.geo_miles).sum()),
                    in_range: in_range_count(s, radius_miles),
                    title_match_pct: per(100.0 * s.items.iter().filter(|i| i.title_match).count() as f64),
                }
            })
            .collect();
        let items = pooled(sets).count();
        let mut report = EvalReport {
            k,
            radius_miles,
            queries: sets.len(),
            items,
            distance_avg: 0.0,
            distance_median: 0.0,
            distance_std: 0.0,
            in_range_avg: 0.0,
            in_range_median: 0.0,
            title_match_pct: 0.0,
            coverage_pct: 0.0,
            degenerate: items == 0,
            per_query,
        };
        if report.degenerate {
            return Ok(report);
        }
        let d = distance_stats(sets)?;
        let counts: Vec<f64> = report.per_query.iter().map(|q| q.in_range as f64).collect();
        report.distance_avg = d.avg;
        report.distance_median = d.median;
        report.distance_std = d.std;
        report.in_range_avg = counts.iter().sum::<f64>() / counts.len() as f64;
        report.in_range_median = lower_median(counts);
        report.title_match_pct = title_match_rate(sets)?;
        report.coverage_pct = title_coverage(sets, radius_miles)?;
        Ok(report)
    }

    /// Aligned columns: distance, in-range and title tables.
    pub fn write_table<W: Write>(&self, mut w: W, label: &str) -> Result<()> {
        writeln!(w, "model: {label}  queries: {}  k: {}  radius: {} mi", self.queries, self.k, self.radius_miles)?;
        if self.degenerate {
            writeln!(w, "degenerate: no recommendations")?;
        }
        writeln!(w, "{:<14}{:>14}{:>14}{:>14}", "distance (mi)", "average", "median", "std")?;
        writeln!(
            w,
            "{:<14}{:>14.3}{:>14.3}{:>14.3}",
            "", self.distance_avg, self.distance_median, self.distance_std
        )?;
        writeln!(w, "{:<14}{:>14}{:>14}", format!("in {} mi", self.radius_miles), "average", "median")?;
        writeln!(w, "{:<14}{:>14.3}{:>14.3}", "", self.in_range_avg, self.in_range_median)?;
        writeln!(w, "{:<14}{:>14}{:>14}", "title", "match (%)", "coverage (%)")?;
        writeln!(w, "{:<14}{:>14.3}{:>14.3}", "", self.title_match_pct, self.coverage_pct)?;
        Ok(())
    }

    /// One `metric=value` per line.
    pub fn write_kv<W: Write>(&self, mut w: W) -> Result<()> {
        let rows: [(&str, String); 12] = [
            ("k", self.k.to_string()),
            ("radius_miles", self.radius_miles.to_string()),
            ("queries", self.queries.to_string()),
            ("items", self.items.to_string()),
            ("degenerate", self.degenerate.to_string()),
            ("distance_avg", self.distance_avg.to_string()),
            ("distance_median", self.distance_median.to_string()),
            ("distance_std", self.distance_std.to_string()),
            ("in_range_avg", self.in_range_avg.to_string()),
            ("in_range_median", self.in_range_median.to_string()),
            ("title_match_pct", self.title_match_pct.to_string()),
            ("coverage_pct", self.coverage_pct.to_string()),
        ];
        for (key, value) in rows {
            writeln!(w, "{key}={value}")?;
        }
        Ok(())
    }
}

/// Query positions: all of `0..n` when `queries >= n`, otherwise a seeded
/// sample in ascending order.
pub fn sample_queries(n: usize, queries: usize, seed: u64) -> Vec<usize> {
    if queries >= n {
        return (0..n).collect();
    }
    let mut picked = sample(&mut stream_rng(seed, 0), n, queries).into_vec();
    picked.sort_unstable();
    picked
}

/// Top-`k` recommendations for one corpus posting, itself excluded.
pub fn recommend(
    postings: &[JobPosting],
    by_id: &HashMap<&str, usize>,
    vectors: &VectorSet,
    index: &dyn AnnIndex,
    query: usize,
    k: usize,
) -> Result<RecommendationSet> {
    let q = &postings[query];
    let hits = index.search(vectors.vector(query), k + 1)?;
    let origin = q.location();
    let mut items = Vec::with_capacity(k);
    for hit in hits {
        let id = index.id(hit.pos);
        if id == q.id {
            continue;
        }
        let &p = by_id.get(id).ok_or_else(|| Error::UnknownId(id.to_string()))?;
        let rec = &postings[p];
        items.push(RecommendedItem {
            posting_id: rec.id.clone(),
            distance: hit.distance,
            geo_miles: haversine_miles(origin, rec.location()),
            title_match: rec.title_id == q.title_id,
        });
        if items.len() == k {
            break;
        }
    }
    Ok(RecommendationSet {
        query_id: q.id.clone(),
        items,
    })
}

/// Check that `vectors` row `i` belongs to `postings[i]` and that the index
/// holds exactly the corpus ids.
pub fn check_alignment(postings: &[JobPosting], vectors: &VectorSet, index: &dyn AnnIndex) -> Result<()> {
    if vectors.len() != postings.len() || index.len() != postings.len() {
        return Err(Error::Format(format!(
            "corpus has {} postings, vectors {}, index {}",
            postings.len(),
            vectors.len(),
            index.len()
        )));
    }
    if vectors.dim() != index.dim() {
        return Err(Error::DimensionMismatch {
            expected: index.dim(),
            actual: vectors.dim(),
        });
    }
    for (i, p) in postings.iter().enumerate() {
        if vectors.id(i) != p.id {
            return Err(Error::Format(format!(
                "vector row {i} is {:?}, corpus has {:?}",
                vectors.id(i),
                p.id
            )));
        }
        if index.position(&p.id).is_none() {
            return Err(Error::UnknownId(p.id.clone()));
        }
    }
    Ok(())
}

/// Recommend for `cfg.queries` sampled postings and score the results.
pub fn evaluate_model(
    postings: &[JobPosting],
    vectors: &VectorSet,
    index: &dyn AnnIndex,
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    check_alignment(postings, vectors, index)?;
    let by_id: HashMap<&str, usize> = postings.iter().enumerate().map(|(i, p)| (p.id.as_str(), i)).collect();
    let queries = sample_queries(postings.len(), cfg.queries, cfg.seed);
    let sets = queries
        .par_iter()
        .map(|&q| recommend(postings, &by_id, vectors, index, q, cfg.k))
        .collect::<Result<Vec<_>>>()?;
    EvalReport::from_sets(&sets, cfg.k, cfg.radius_miles)
}
