//! The three relation graphs and BPR triplet sampling over them.

use std::collections::BTreeSet;
use std::fmt;
use std::io::Write;

use log::warn;
use rand::Rng;

use crate::corpus::{CareerSequence, JobPosting};
use crate::rng::stream_rng;
use crate::{Error, Result};

/// Negative draws per positive edge before another edge is tried.
const MAX_NEGATIVE_ATTEMPTS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RelationKind {
    JobJob,
    SkillSkill,
    JobSkill,
}

impl RelationKind {
    pub const ALL: [RelationKind; 3] = [
        RelationKind::JobJob,
        RelationKind::SkillSkill,
        RelationKind::JobSkill,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RelationKind::JobJob => "job_job",
            RelationKind::SkillSkill => "skill_skill",
            RelationKind::JobSkill => "job_skill",
        }
    }

    /// Whether source and target ids index the same vocabulary.
    pub fn same_domain(self) -> bool {
        !matches!(self, RelationKind::JobSkill)
    }
}

impl fmt::Display for RelationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Unweighted adjacency sets from source ids to positive target ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationGraph {
    kind: RelationKind,
    adjacency: Vec<Vec<usize>>,
    right_count: usize,
}

impl RelationGraph {
    fn from_sets(kind: RelationKind, sets: Vec<BTreeSet<usize>>, right_count: usize) -> Self {
        RelationGraph {
            kind,
            adjacency: sets.into_iter().map(|s| s.into_iter().collect()).collect(),
            right_count,
        }
    }

    pub fn kind(&self) -> RelationKind {
        self.kind
    }

    pub fn left_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn right_count(&self) -> usize {
        self.right_count
    }

    /// Sorted positive neighbours of `source`.
    pub fn neighbors(&self, source: usize) -> &[usize] {
        self.adjacency.get(source).map_or(&[], Vec::as_slice)
    }

    pub fn contains(&self, source: usize, target: usize) -> bool {
        self.neighbors(source).binary_search(&target).is_ok()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(s, n)| n.iter().map(move |&t| (s, t)))
    }

    /// Write `kind<TAB>src<TAB>dst` lines.
    pub fn write_edge_list<W: Write>(&self, mut writer: W) -> Result<()> {
        for (s, t) in self.edges() {
            writeln!(writer, "{}\t{s}\t{t}", self.kind)?;
        }
        Ok(())
    }
}

/// Directed edge `x -> y` for every consecutive pair of distinct titles.
pub fn build_job_job(sequences: &[CareerSequence], num_titles: usize) -> Result<RelationGraph> {
    let mut sets = vec![BTreeSet::new(); num_titles];
    for seq in sequences {
        for pair in seq.titles.windows(2) {
            let (x, y) = (pair[0], pair[1]);
            for id in [x, y] {
                check_id("title", id, num_titles)?;
            }
            if x != y {
                sets[x].insert(y);
            }
        }
    }
    Ok(RelationGraph::from_sets(RelationKind::JobJob, sets, num_titles))
}

/// Symmetric edges between every pair of skills listed on one record.
pub fn build_skill_skill(corpus: &[JobPosting], num_skills: usize) -> Result<RelationGraph> {
    let mut sets = vec![BTreeSet::new(); num_skills];
    for p in corpus {
        for &s in &p.skill_ids {
            check_id("skill", s, num_skills)?;
        }
        for (i, &a) in p.skill_ids.iter().enumerate() {
            for &b in &p.skill_ids[i + 1..] {
                if a != b {
                    sets[a].insert(b);
                    sets[b].insert(a);
                }
            }
        }
    }
    Ok(RelationGraph::from_sets(RelationKind::SkillSkill, sets, num_skills))
}

/// Edge `title -> skill` for every skill listed under a title.
pub fn build_job_skill(
    corpus: &[JobPosting],
    num_titles: usize,
    num_skills: usize,
) -> Result<RelationGraph> {
    let mut sets = vec![BTreeSet::new(); num_titles];
    for p in corpus {
        check_id("title", p.title_id, num_titles)?;
        for &s in &p.skill_ids {
            check_id("skill", s, num_skills)?;
            sets[p.title_id].insert(s);
        }
    }
    Ok(RelationGraph::from_sets(RelationKind::JobSkill, sets, num_skills))
}

fn check_id(what: &'static str, id: usize, size: usize) -> Result<()> {
    if id < size {
        Ok(())
    } else {
        Err(Error::IdOutOfRange { what, id, size })
    }
}

/// Ordered BPR example: `x` should prefer `y` over `z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Triplet {
    pub x: usize,
    pub y: usize,
    pub z: usize,
    pub kind: RelationKind,
}

/// Uniform edge sampler with uniform rejection-sampled negatives.
///
/// Sources whose neighbourhood leaves no legal negative are dropped once at
/// construction. In same-domain graphs the source itself is never a negative.
#[derive(Debug, Clone)]
pub struct TripletSampler<'g> {
    graph: &'g RelationGraph,
    edges: Vec<(usize, usize)>,
}

impl<'g> TripletSampler<'g> {
    pub fn new(graph: &'g RelationGraph) -> Result<Self> {
        if graph.edge_count() == 0 {
            return Err(Error::Sampling(format!("{} graph has no edges", graph.kind)));
        }
        let reserved = usize::from(graph.kind.same_domain());
        let mut edges = Vec::with_capacity(graph.edge_count());
        for (source, neighbors) in graph.adjacency.iter().enumerate() {
            if neighbors.is_empty() {
                continue;
            }
            if neighbors.len() + reserved >= graph.right_count {
                warn!(
                    "{} source {source} is linked to its whole target domain; skipped",
                    graph.kind
                );
                continue;
            }
            edges.extend(neighbors.iter().map(|&t| (source, t)));
        }
        if edges.is_empty() {
            return Err(Error::Sampling(format!(
                "{} graph has no source with a legal negative",
                graph.kind
            )));
        }
        Ok(TripletSampler { graph, edges })
    }

    pub fn graph(&self) -> &RelationGraph {
        self.graph
    }

    pub fn sample_one(&self, rng: &mut impl Rng) -> Triplet {
        let same_domain = self.graph.kind.same_domain();
        loop {
            let (x, y) = self.edges[rng.random_range(0..self.edges.len())];
            for _ in 0..MAX_NEGATIVE_ATTEMPTS {
                let z = rng.random_range(0..self.graph.right_count);
                if (same_domain && z == x) || self.graph.contains(x, z) {
                    continue;
                }
                return Triplet {
                    x,
                    y,
                    z,
                    kind: self.graph.kind,
                };
            }
        }
    }

    pub fn sample(&self, count: usize, rng: &mut impl Rng) -> Vec<Triplet> {
        (0..count).map(|_| self.sample_one(rng)).collect()
    }
}

/// `count` triplets drawn from `graph`, reproducible from `seed`.
pub fn sample_triplets(graph: &RelationGraph, count: usize, seed: u64) -> Result<Vec<Triplet>> {
    let sampler = TripletSampler::new(graph)?;
    let mut rng = stream_rng(seed, 0);
    Ok(sampler.sample(count, &mut rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_synthetic, RecordKind, SynthConfig};
    use proptest::prelude::*;

    fn seq(titles: &[usize]) -> CareerSequence {
        CareerSequence {
            person_id: "p".into(),
            titles: titles.to_vec(),
        }
    }

    fn posting(title: usize, skills: &[usize]) -> JobPosting {
        JobPosting {
            id: String::new(),
            title_id: title,
            skill_ids: skills.to_vec(),
            lat_deg: 0.0,
            lon_deg: 0.0,
            kind: RecordKind::Posting,
        }
    }

    #[test]
    fn job_job_edges() {
        let g = build_job_job(&[seq(&[0, 1, 2]), seq(&[3, 3])], 4).unwrap();
        assert_eq!(g.edges().collect::<Vec<_>>(), vec![(0, 1), (1, 2)]);
        assert!(!g.contains(1, 0));
        assert_eq!(build_job_job(&[], 3).unwrap().edge_count(), 0);
        assert!(build_job_job(&[seq(&[0, 9])], 4).is_err());
    }

    #[test]
    fn skill_skill_edges() {
        let g = build_skill_skill(&[posting(0, &[1, 2, 3]), posting(0, &[4])], 5).unwrap();
        let edges: Vec<_> = g.edges().collect();
        assert_eq!(edges, vec![(1, 2), (1, 3), (2, 1), (2, 3), (3, 1), (3, 2)]);
        assert!(g.neighbors(4).is_empty());
    }

    #[test]
    fn job_skill_edges() {
        let g = build_job_skill(&[posting(0, &[1, 2]), posting(0, &[3])], 1, 4).unwrap();
        assert_eq!(g.neighbors(0), &[1, 2, 3]);
    }

    #[test]
    fn noise_free_synthetic_graphs_stay_in_track() {
        let cfg = SynthConfig {
            noise: 0.0,
            postings: 3000,
            sequences: 1000,
            ..SynthConfig::default()
        };
        let s = generate_synthetic(&cfg, 11).unwrap();
        let jj = build_job_job(&s.sequences, s.titles.len()).unwrap();
        assert!(jj.edge_count() > 0);
        for (x, y) in jj.edges() {
            assert_eq!(cfg.track_of_title(x), cfg.track_of_title(y));
        }
        let js = build_job_skill(&s.postings, s.titles.len(), s.skills.len()).unwrap();
        for (t, k) in js.edges() {
            assert_eq!(cfg.track_of_title(t), cfg.track_of_skill(k));
        }
    }

    #[test]
    fn single_edge_graph_has_one_triplet() {
        let g = build_job_job(&[seq(&[0, 1])], 3).unwrap();
        let ts = sample_triplets(&g, 50, 5).unwrap();
        assert!(ts.iter().all(|t| (t.x, t.y, t.z) == (0, 1, 2)));
    }

    #[test]
    fn sampling_errors_and_skips() {
        let empty = build_job_job(&[], 3).unwrap();
        assert!(matches!(sample_triplets(&empty, 1, 0), Err(Error::Sampling(_))));

        // Title 0 lists every skill, so only title 1 can be sampled.
        let g = build_job_skill(&[posting(0, &[0, 1]), posting(1, &[0])], 2, 2).unwrap();
        let ts = sample_triplets(&g, 20, 1).unwrap();
        assert!(ts.iter().all(|t| (t.x, t.y, t.z) == (1, 0, 1)));

        let full = build_job_skill(&[posting(0, &[0, 1])], 1, 2).unwrap();
        assert!(sample_triplets(&full, 1, 0).is_err());
    }

    #[test]
    fn edge_list_format() {
        let g = build_job_job(&[seq(&[2, 0])], 3).unwrap();
        let mut buf = Vec::new();
        g.write_edge_list(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "job_job\t2\t0\n");
    }

    fn arb_corpus() -> impl Strategy<Value = Vec<JobPosting>> {
        prop::collection::vec(
            (0usize..6, prop::collection::btree_set(0usize..12, 0..6)),
            1..40,
        )
        .prop_map(|rows| {
            rows.into_iter()
                .map(|(t, s)| posting(t, &s.into_iter().collect::<Vec<_>>()))
                .collect()
        })
    }

    proptest! {
        #[test]
        fn skill_graph_symmetric(corpus in arb_corpus()) {
            let g = build_skill_skill(&corpus, 12).unwrap();
            for (a, b) in g.edges() {
                prop_assert!(g.contains(b, a));
                prop_assert_ne!(a, b);
            }
        }

        #[test]
        fn order_insensitive(mut corpus in arb_corpus(), seed in any::<u64>()) {
            let ss = build_skill_skill(&corpus, 12).unwrap();
            let js = build_job_skill(&corpus, 6, 12).unwrap();
            let mut rng = stream_rng(seed, 0);
            use rand::seq::SliceRandom;
            corpus.shuffle(&mut rng);
            prop_assert_eq!(ss, build_skill_skill(&corpus, 12).unwrap());
            prop_assert_eq!(js, build_job_skill(&corpus, 6, 12).unwrap());
        }

        #[test]
        fn triplets_respect_membership(corpus in arb_corpus(), seed in any::<u64>()) {
            for g in [build_skill_skill(&corpus, 12).unwrap(), build_job_skill(&corpus, 6, 12).unwrap()] {
                let Ok(ts) = sample_triplets(&g, 64, seed) else { continue };
                prop_assert_eq!(ts.len(), 64);
                for t in &ts {
                    prop_assert!(g.contains(t.x, t.y));
                    prop_assert!(!g.contains(t.x, t.z));
                    prop_assert_ne!(t.y, t.z);
                    if g.kind().same_domain() {
                        prop_assert_ne!(t.x, t.z);
                    }
                }
                prop_assert_eq!(ts, sample_triplets(&g, 64, seed).unwrap());
            }
        }
    }
}
