//! Per-posting vectors: title retrofitted towards its skills, then a weighted
//! location block.
//!
//! The one-shot update used for postings is
//! `q_job = (n * q_title + Σ q_skill) / (2n)`; the semantic block is then
//! scaled to unit length and `w_loc * (x, y, z)` is appended. The general
//! iterative retrofit is available for refining a whole vocabulary against a
//! lexicon (for example the skill co-occurrence graph).

mod io;

use log::warn;
use rayon::prelude::*;

use crate::corpus::{CuratedSkillTable, JobPosting};
use crate::geo::GeoVector;
use crate::graphs::RelationGraph;
use crate::train::{EmbeddingSpace, Matrix};
use crate::{Error, Result};

pub use io::VectorSet;

/// `semantic ⊕ location`, with the location block equal to `w_loc` times a
/// unit vector.
#[derive(Debug, Clone, PartialEq)]
pub struct JobVector {
    full: Vec<f64>,
    w_loc: f64,
}

impl JobVector {
    pub fn semantic(&self) -> &[f64] {
        &self.full[..self.full.len() - 3]
    }

    pub fn location(&self) -> &[f64] {
        &self.full[self.full.len() - 3..]
    }

    pub fn full(&self) -> &[f64] {
        &self.full
    }

    pub fn w_loc(&self) -> f64 {
        self.w_loc
    }

    pub fn dim(&self) -> usize {
        self.full.len()
    }
}

/// Weighted undirected neighbour lists with per-node anchor weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Lexicon {
    neighbors: Vec<Vec<(usize, f64)>>,
    alpha: Vec<f64>,
}

impl Lexicon {
    /// Lexicon over `nodes` vectors with `β_ij = 1 / deg(i)` and `α_i = 1`.
    /// Edges are undirected; duplicates and self-loops are ignored.
    pub fn from_edges(nodes: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut adj = vec![Vec::new(); nodes];
        for (a, b) in edges {
            for id in [a, b] {
                if id >= nodes {
                    return Err(Error::IdOutOfRange {
                        what: "lexicon node",
                        id,
                        size: nodes,
                    });
                }
            }
            if a != b {
                adj[a].push(b);
                adj[b].push(a);
            }
        }
        let neighbors = adj
            .into_iter()
            .map(|mut n| {
                n.sort_unstable();
                n.dedup();
                let beta = 1.0 / n.len().max(1) as f64;
                n.into_iter().map(|j| (j, beta)).collect()
            })
            .collect();
        Ok(Lexicon {
            neighbors,
            alpha: vec![1.0; nodes],
        })
    }

    /// Lexicon from a same-domain relation graph.
    pub fn from_graph(graph: &RelationGraph) -> Result<Self> {
        if !graph.kind().same_domain() {
            return Err(Error::Config(format!(
                "a lexicon needs a same-domain graph, got {}",
                graph.kind()
            )));
        }
        Lexicon::from_edges(graph.left_count(), graph.edges())
    }

    /// Explicit weights. `β_ij` and `α_i` must be finite and non-negative.
    pub fn with_weights(neighbors: Vec<Vec<(usize, f64)>>, alpha: Vec<f64>) -> Result<Self> {
        if neighbors.len() != alpha.len() {
            return Err(Error::DimensionMismatch {
                expected: neighbors.len(),
                actual: alpha.len(),
            });
        }
        let n = neighbors.len();
        let weight_ok = |w: f64| w >= 0.0 && w.is_finite();
        for (list, &a) in neighbors.iter().zip(&alpha) {
            if !weight_ok(a) {
                return Err(Error::Config(format!("invalid anchor weight {a}")));
            }
            for &(j, b) in list {
                if j >= n {
                    return Err(Error::IdOutOfRange {
                        what: "lexicon node",
                        id: j,
                        size: n,
                    });
                }
                if !weight_ok(b) {
                    return Err(Error::Config(format!("invalid edge weight {b}")));
                }
            }
        }
        Ok(Lexicon { neighbors, alpha })
    }

    /// Same neighbour structure with every `β_ij` set to `beta`.
    pub fn with_uniform_beta(mut self, beta: f64) -> Self {
        for list in &mut self.neighbors {
            for edge in list.iter_mut() {
                edge.1 = beta;
            }
        }
        self
    }

    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }

    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.neighbors[i]
    }
}

/// Retrofitted vectors plus the largest coordinate change of every iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct Retrofit {
    pub vectors: Matrix,
    pub max_change: Vec<f64>,
}

/// Jacobi iteration of
/// `q_i = (Σ_j β_ij q_j + α_i q̂_i) / (Σ_j β_ij + α_i)`
/// where every update reads the previous iterate.
pub fn retrofit_iterative(initial: &Matrix, lexicon: &Lexicon, iterations: usize) -> Result<Retrofit> {
    if lexicon.len() != initial.rows() {
        return Err(Error::DimensionMismatch {
            expected: initial.rows(),
            actual: lexicon.len(),
        });
    }
    let dim = initial.cols();
    for i in 0..lexicon.len() {
        let total: f64 = lexicon.neighbors[i].iter().map(|e| e.1).sum::<f64>() + lexicon.alpha[i];
        if total == 0.0 {
            warn!("lexicon node {i} has zero total weight; left unchanged");
        }
    }

    let mut current = initial.clone();
    let mut max_change = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        let mut next = current.clone();
        let mut change = 0.0f64;
        for i in 0..lexicon.len() {
            let alpha = lexicon.alpha[i];
            let total: f64 = lexicon.neighbors[i].iter().map(|e| e.1).sum::<f64>() + alpha;
            if total == 0.0 {
                continue;
            }
            let mut acc: Vec<f64> = initial.row(i).iter().map(|v| alpha * v).collect();
            for &(j, beta) in &lexicon.neighbors[i] {
                for (a, v) in acc.iter_mut().zip(current.row(j)) {
                    *a += beta * v;
                }
            }
            let row = next.row_mut(i);
            for k in 0..dim {
                let v = acc[k] / total;
                change = change.max((v - row[k]).abs());
                row[k] = v;
            }
        }
        current = next;
        max_change.push(change);
    }
    Ok(Retrofit {
        vectors: current,
        max_change,
    })
}

/// `(n * title + Σ skills) / (2n)`.
pub fn compose_job_vector(title: &[f64], skills: &[&[f64]]) -> Result<Vec<f64>> {
    if skills.is_empty() {
        return Err(Error::Empty("skill vectors"));
    }
    let n = skills.len() as f64;
    let mut out: Vec<f64> = title.iter().map(|v| n * v).collect();
    for s in skills {
        if s.len() != title.len() {
            return Err(Error::DimensionMismatch {
                expected: title.len(),
                actual: s.len(),
            });
        }
        for (o, v) in out.iter_mut().zip(s.iter()) {
            *o += v;
        }
    }
    for o in &mut out {
        *o /= 2.0 * n;
    }
    Ok(out)
}

/// Unit-normalize `semantic` and append `w_loc * g`.
pub fn append_location(semantic: &[f64], g: GeoVector, w_loc: f64) -> Result<JobVector> {
    if !(w_loc >= 0.0 && w_loc.is_finite()) {
        return Err(Error::Config(format!("location weight must be finite and >= 0, got {w_loc}")));
    }
    let norm = semantic.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !norm.is_finite() {
        return Err(Error::Format("non-finite semantic vector".into()));
    }
    if norm == 0.0 {
        return Err(Error::ZeroVector);
    }
    let mut full: Vec<f64> = semantic.iter().map(|v| v / norm).collect();
    full.extend(g.as_array().iter().map(|c| w_loc * c));
    Ok(JobVector { full, w_loc })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VectorizeOptions {
    pub w_loc: f64,
    /// Fall back to the bare title vector when no skill can be resolved.
    pub lenient: bool,
}

impl Default for VectorizeOptions {
    fn default() -> Self {
        VectorizeOptions {
            w_loc: 1.0,
            lenient: false,
        }
    }
}

/// Skills used for a posting: its own known skills, else the curated list.
fn resolve_skills(p: &JobPosting, num_skills: usize, table: Option<&CuratedSkillTable>) -> Vec<usize> {
    let known: Vec<usize> = p.skill_ids.iter().copied().filter(|&s| s < num_skills).collect();
    if !known.is_empty() {
        return known;
    }
    if !p.skill_ids.is_empty() {
        warn!("record {}: none of its skills has an embedding", p.id);
    }
    table
        .and_then(|t| t.get(p.title_id))
        .map(|list| list.iter().copied().filter(|&s| s < num_skills).collect())
        .unwrap_or_default()
}

pub fn vectorize_posting(
    p: &JobPosting,
    space: &EmbeddingSpace,
    table: Option<&CuratedSkillTable>,
    opts: &VectorizeOptions,
) -> Result<JobVector> {
    if p.title_id >= space.num_titles() {
        return Err(Error::UnknownTitle {
            id: p.id.clone(),
            title: format!("#{}", p.title_id),
        });
    }
    let title = space.titles.row(p.title_id);
    let skills = resolve_skills(p, space.num_skills(), table);
    let semantic = if skills.is_empty() {
        if !opts.lenient {
            return Err(Error::UnresolvableSkills { id: p.id.clone() });
        }
        title.to_vec()
    } else {
        let rows: Vec<&[f64]> = skills.iter().map(|&s| space.skills.row(s)).collect();
        compose_job_vector(title, &rows)?
    };
    append_location(&semantic, p.location().to_unit_vector(), opts.w_loc)
}

/// Vectorize every posting, in order.
pub fn vectorize_corpus(
    postings: &[JobPosting],
    space: &EmbeddingSpace,
    table: Option<&CuratedSkillTable>,
    opts: &VectorizeOptions,
) -> Result<Vec<JobVector>> {
    postings
        .par_iter()
        .map(|p| vectorize_posting(p, space, table, opts))
        .collect()
}
