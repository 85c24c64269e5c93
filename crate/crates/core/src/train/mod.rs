//! Joint BPR training of title and skill embeddings.
//!
//! All three relation graphs share the parameters: job-job triplets read all
//! rows from the title matrix, skill-skill triplets from the skill matrix,
//! and job-skill triplets take the source from the title matrix and the
//! positive/negative from the skill matrix. The objective is
//!
//! ```text
//! O = Σ_jj -ln σ(A_xy - A_xz) + Σ_ss ... + Σ_js ... + λ (‖W‖²_F + ‖W'‖²_F)
//! ```
//!
//! with affinities `A_xy = <w_x, w_y>`. SGD applies the L2 penalty only to the
//! three rows touched by each update.

mod io;

use log::info;
use rand::Rng;

use crate::corpus::{CareerSequence, JobPosting};
use crate::graphs::{
    build_job_job, build_job_skill, build_skill_skill, RelationGraph, RelationKind, Triplet, TripletSampler,
};
use crate::rng::stream_rng;
use crate::{Error, Result};

pub use io::{read_embeddings, write_embeddings, write_loss_csv, TrainedModel};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                actual: data.len(),
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Title matrix `W` and skill matrix `W'` in one `dim`-dimensional space.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSpace {
    pub titles: Matrix,
    pub skills: Matrix,
}

impl EmbeddingSpace {
    pub fn new(titles: Matrix, skills: Matrix) -> Result<Self> {
        if titles.cols() != skills.cols() {
            return Err(Error::DimensionMismatch {
                expected: titles.cols(),
                actual: skills.cols(),
            });
        }
        Ok(EmbeddingSpace { titles, skills })
    }

    pub fn dim(&self) -> usize {
        self.titles.cols()
    }

    pub fn num_titles(&self) -> usize {
        self.titles.rows()
    }

    pub fn num_skills(&self) -> usize {
        self.skills.rows()
    }

    fn check_triplet(&self, t: &Triplet) -> Result<()> {
        let (source_rows, target_rows, what) = match t.kind {
            RelationKind::JobJob => (self.num_titles(), self.num_titles(), "title"),
            RelationKind::SkillSkill => (self.num_skills(), self.num_skills(), "skill"),
            RelationKind::JobSkill => (self.num_titles(), self.num_skills(), "skill"),
        };
        if t.x >= source_rows {
            return Err(Error::IdOutOfRange {
                what: if t.kind == RelationKind::SkillSkill { "skill" } else { "title" },
                id: t.x,
                size: source_rows,
            });
        }
        for id in [t.y, t.z] {
            if id >= target_rows {
                return Err(Error::IdOutOfRange {
                    what,
                    id,
                    size: target_rows,
                });
            }
        }
        Ok(())
    }

    /// Rows `(x, y, z)` of a (validated) triplet.
    fn triplet_rows(&self, t: &Triplet) -> (&[f64], &[f64], &[f64]) {
        match t.kind {
            RelationKind::JobJob => (self.titles.row(t.x), self.titles.row(t.y), self.titles.row(t.z)),
            RelationKind::SkillSkill => (self.skills.row(t.x), self.skills.row(t.y), self.skills.row(t.z)),
            RelationKind::JobSkill => (self.titles.row(t.x), self.skills.row(t.y), self.skills.row(t.z)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub dim: usize,
    pub lambda: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    /// Triplets drawn per graph each epoch; `None` uses the graph's edge count.
    pub triplets_per_epoch: Option<usize>,
    pub seed: u64,
    /// Half-width of the uniform initializer; `None` uses `0.1 / sqrt(dim)`.
    pub init_scale: Option<f64>,
    /// Held-out sample size per graph, as a fraction of that graph's
    /// per-epoch triplet count.
    pub heldout_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dim: 50,
            lambda: 0.001,
            learning_rate: 0.05,
            epochs: 100,
            triplets_per_epoch: None,
            seed: 0,
            init_scale: None,
            heldout_fraction: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.dim == 0 {
            return bad("dim must be at least 1");
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be finite and non-negative");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if self.triplets_per_epoch == Some(0) {
            return bad("triplets_per_epoch must be positive");
        }
        if let Some(s) = self.init_scale {
            if !(s >= 0.0 && s.is_finite()) {
                return bad("init_scale must be finite and non-negative");
            }
        }
        if !(self.heldout_fraction > 0.0 && self.heldout_fraction <= 1.0) {
            return bad("heldout_fraction must be in (0, 1]");
        }
        Ok(())
    }

    pub fn effective_init_scale(&self) -> f64 {
        self.init_scale
            .unwrap_or_else(|| 0.1 / (self.dim as f64).sqrt())
    }
}

const STREAM_INIT: u64 = 0;
const STREAM_HELDOUT: u64 = 1;
const STREAM_EPOCH_BASE: u64 = 16;

/// Uniform `[-s, s]` initialization, reproducible from `cfg.seed`.
pub fn init_embeddings(num_titles: usize, num_skills: usize, cfg: &TrainConfig) -> Result<EmbeddingSpace> {
    if num_titles == 0 || num_skills == 0 {
        return Err(Error::Empty("vocabulary"));
    }
    cfg.validate()?;
    let scale = cfg.effective_init_scale();
    let mut rng = stream_rng(cfg.seed, STREAM_INIT);
    let mut fill = |rows: usize| {
        let data = (0..rows * cfg.dim)
            .map(|_| if scale > 0.0 { rng.random_range(-scale..=scale) } else { 0.0 })
            .collect();
        Matrix {
            rows,
            cols: cfg.dim,
            data,
        }
    };
    let titles = fill(num_titles);
    let skills = fill(num_skills);
    Ok(EmbeddingSpace { titles, skills })
}

fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

/// Dot-product affinity between two embeddings.
pub fn affinity(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            actual: v.len(),
        });
    }
    Ok(dot(u, v))
}

/// `ln(1 + e^v)` without overflow.
pub fn softplus(v: f64) -> f64 {
    v.max(0.0) + (-v.abs()).exp().ln_1p()
}

pub fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// `-ln σ(d)` for the affinity margin `d = A_xy - A_xz`.
pub fn margin_loss(d: f64) -> f64 {
    softplus(-d)
}

fn margin(space: &EmbeddingSpace, t: &Triplet) -> f64 {
    let (x, y, z) = space.triplet_rows(t);
    dot(x, y) - dot(x, z)
}

pub fn triplet_loss(space: &EmbeddingSpace, t: &Triplet) -> Result<f64> {
    space.check_triplet(t)?;
    Ok(margin_loss(margin(space, t)))
}

/// One per-epoch (or initial) evaluation on the held-out triplets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossEntry {
    pub epoch: usize,
    pub o_jj: f64,
    pub o_ss: f64,
    pub o_js: f64,
    pub reg: f64,
    pub total: f64,
    pub heldout_accuracy: f64,
    /// Ranking accuracy per kind, in `RelationKind::ALL` order.
    pub accuracy_by_kind: [f64; 3],
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LossReport {
    pub entries: Vec<LossEntry>,
}

impl LossReport {
    pub fn initial(&self) -> Option<&LossEntry> {
        self.entries.first()
    }

    pub fn last(&self) -> Option<&LossEntry> {
        self.entries.last()
    }
}

/// Triplet sets for the three graphs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TripletBatches {
    pub job_job: Vec<Triplet>,
    pub skill_skill: Vec<Triplet>,
    pub job_skill: Vec<Triplet>,
}

impl TripletBatches {
    pub fn by_kind(&self) -> [&[Triplet]; 3] {
        [&self.job_job, &self.skill_skill, &self.job_skill]
    }
}

/// Joint objective over explicit batches; `epoch` and accuracies are left at 0.
pub fn joint_loss(space: &EmbeddingSpace, batches: &TripletBatches, lambda: f64) -> Result<LossEntry> {
    let mut sums = [0.0; 3];
    for (sum, batch) in sums.iter_mut().zip(batches.by_kind()) {
        for t in batch {
            *sum += triplet_loss(space, t)?;
        }
    }
    let reg = lambda * (space.titles.frobenius_sq() + space.skills.frobenius_sq());
    Ok(LossEntry {
        epoch: 0,
        o_jj: sums[0],
        o_ss: sums[1],
        o_js: sums[2],
        reg,
        total: sums[0] + sums[1] + sums[2] + reg,
        heldout_accuracy: 0.0,
        accuracy_by_kind: [0.0; 3],
    })
}

/// Gradient of `-ln σ(A_xy - A_xz) + λ(‖x‖² + ‖y‖² + ‖z‖²)` with respect to
/// the three rows.
#[derive(Debug, Clone, PartialEq)]
pub struct TripletGradient {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
}

pub fn triplet_gradient(space: &EmbeddingSpace, t: &Triplet, lambda: f64) -> Result<TripletGradient> {
    space.check_triplet(t)?;
    let (x, y, z) = space.triplet_rows(t);
    let g = 1.0 - sigmoid(dot(x, y) - dot(x, z));
    let grad = TripletGradient {
        x: (0..x.len()).map(|i| -g * (y[i] - z[i]) + 2.0 * lambda * x[i]).collect(),
        y: (0..x.len()).map(|i| -g * x[i] + 2.0 * lambda * y[i]).collect(),
        z: (0..x.len()).map(|i| g * x[i] + 2.0 * lambda * z[i]).collect(),
    };
    Ok(grad)
}

/// Apply one SGD update for `t`. Only the three touched rows change.
pub fn sgd_step(space: &mut EmbeddingSpace, t: &Triplet, eta: f64, lambda: f64) -> Result<()> {
    let grad = triplet_gradient(space, t, lambda)?;
    let apply = |row: &mut [f64], g: &[f64]| {
        for (r, g) in row.iter_mut().zip(g) {
            *r -= eta * g;
        }
        row.iter().all(|v| v.is_finite())
    };
    let finite = match t.kind {
        RelationKind::JobJob => {
            apply(space.titles.row_mut(t.x), &grad.x)
                & apply(space.titles.row_mut(t.y), &grad.y)
                & apply(space.titles.row_mut(t.z), &grad.z)
        }
        RelationKind::SkillSkill => {
            apply(space.skills.row_mut(t.x), &grad.x)
                & apply(space.skills.row_mut(t.y), &grad.y)
                & apply(space.skills.row_mut(t.z), &grad.z)
        }
        RelationKind::JobSkill => {
            apply(space.titles.row_mut(t.x), &grad.x)
                & apply(space.skills.row_mut(t.y), &grad.y)
                & apply(space.skills.row_mut(t.z), &grad.z)
        }
    };
    if !finite {
        return Err(Error::Divergence {
            epoch: 0,
            detail: format!(
                "non-finite embedding after {} update ({}, {}, {}) with learning rate {eta}; lower it",
                t.kind, t.x, t.y, t.z
            ),
        });
    }
    Ok(())
}

/// Fraction of triplets with `A_xy > A_xz`; exact ties count one half.
pub fn ranking_accuracy(space: &EmbeddingSpace, heldout: &[Triplet]) -> Result<f64> {
    if heldout.is_empty() {
        return Err(Error::Empty("held-out triplets"));
    }
    let mut score = 0.0;
    for t in heldout {
        space.check_triplet(t)?;
        let d = margin(space, t);
        score += if d > 0.0 {
            1.0
        } else if d == 0.0 {
            0.5
        } else {
            0.0
        };
    }
    Ok(score / heldout.len() as f64)
}

/// The three graphs one model is trained on.
#[derive(Debug, Clone, Copy)]
pub struct TrainingGraphs<'a> {
    pub job_job: &'a RelationGraph,
    pub skill_skill: &'a RelationGraph,
    pub job_skill: &'a RelationGraph,
}

impl<'a> TrainingGraphs<'a> {
    fn by_kind(&self) -> [&'a RelationGraph; 3] {
        [self.job_job, self.skill_skill, self.job_skill]
    }

    fn sizes(&self) -> Result<(usize, usize)> {
        let titles = self.job_job.left_count();
        let skills = self.skill_skill.left_count();
        if self.job_skill.left_count() != titles || self.job_skill.right_count() != skills {
            return Err(Error::DimensionMismatch {
                expected: titles,
                actual: self.job_skill.left_count(),
            });
        }
        Ok((titles, skills))
    }
}

/// Held-out evaluation of `space`, filling in the accuracy fields.
pub fn evaluate_heldout(
    space: &EmbeddingSpace,
    heldout: &TripletBatches,
    lambda: f64,
    epoch: usize,
) -> Result<LossEntry> {
    let mut entry = joint_loss(space, heldout, lambda)?;
    entry.epoch = epoch;
    let mut correct = 0.0;
    let mut total = 0usize;
    for (slot, batch) in entry.accuracy_by_kind.iter_mut().zip(heldout.by_kind()) {
        if batch.is_empty() {
            continue;
        }
        *slot = ranking_accuracy(space, batch)?;
        correct += *slot * batch.len() as f64;
        total += batch.len();
    }
    entry.heldout_accuracy = if total > 0 { correct / total as f64 } else { 0.0 };
    Ok(entry)
}

/// Train embeddings on the three graphs.
///
/// Every epoch draws a fresh triplet sample per graph from its own seeded
/// stream and interleaves the three samples round-robin. The returned report
/// starts with the evaluation of the initial embeddings (epoch 0).
pub fn train(graphs: TrainingGraphs<'_>, cfg: &TrainConfig) -> Result<(EmbeddingSpace, LossReport)> {
    cfg.validate()?;
    let (num_titles, num_skills) = graphs.sizes()?;
    let mut space = init_embeddings(num_titles, num_skills, cfg)?;

    let samplers = graphs
        .by_kind()
        .map(TripletSampler::new)
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let per_epoch: Vec<usize> = samplers
        .iter()
        .map(|s| cfg.triplets_per_epoch.unwrap_or_else(|| s.graph().edge_count()))
        .collect();

    let mut heldout_rng = stream_rng(cfg.seed, STREAM_HELDOUT);
    let mut heldout_sets = samplers.iter().zip(&per_epoch).map(|(s, &n)| {
        let count = ((n as f64 * cfg.heldout_fraction).ceil() as usize).max(1);
        s.sample(count, &mut heldout_rng)
    });
    let heldout = TripletBatches {
        job_job: heldout_sets.next().unwrap_or_default(),
        skill_skill: heldout_sets.next().unwrap_or_default(),
        job_skill: heldout_sets.next().unwrap_or_default(),
    };

    let mut report = LossReport::default();
    report.entries.push(evaluate_heldout(&space, &heldout, cfg.lambda, 0)?);

    for epoch in 1..=cfg.epochs {
        let mut rng = stream_rng(cfg.seed, STREAM_EPOCH_BASE + epoch as u64);
        let batches: Vec<Vec<Triplet>> = samplers
            .iter()
            .zip(&per_epoch)
            .map(|(s, &n)| s.sample(n, &mut rng))
            .collect();
        let longest = per_epoch.iter().copied().max().unwrap_or(0);
        for i in 0..longest {
            for batch in &batches {
                if let Some(t) = batch.get(i) {
                    sgd_step(&mut space, t, cfg.learning_rate, cfg.lambda).map_err(|e| match e {
                        Error::Divergence { detail, .. } => Error::Divergence { epoch, detail },
                        other => other,
                    })?;
                }
            }
        }
        let entry = evaluate_heldout(&space, &heldout, cfg.lambda, epoch)?;
        if !entry.total.is_finite() {
            return Err(Error::Divergence {
                epoch,
                detail: "held-out loss is not finite".into(),
            });
        }
        if epoch % 10 == 0 || epoch == cfg.epochs {
            info!(
                "epoch {epoch}: held-out loss {:.4}, accuracy {:.4}",
                entry.total, entry.heldout_accuracy
            );
        }
        report.entries.push(entry);
    }
    Ok((space, report))
}

/// Build the three graphs from a corpus and train on them.
pub fn train_corpus(
    postings: &[JobPosting],
    sequences: &[CareerSequence],
    num_titles: usize,
    num_skills: usize,
    cfg: &TrainConfig,
) -> Result<(EmbeddingSpace, LossReport)> {
    let job_job = build_job_job(sequences, num_titles)?;
    let skill_skill = build_skill_skill(postings, num_skills)?;
    let job_skill = build_job_skill(postings, num_titles, num_skills)?;
    info!(
        "graphs: {} job-job, {} skill-skill, {} job-skill edges",
        job_job.edge_count(),
        skill_skill.edge_count(),
        job_skill.edge_count()
    );
    train(
        TrainingGraphs {
            job_job: &job_job,
            skill_skill: &skill_skill,
            job_skill: &job_skill,
        },
        cfg,
    )
}

#[cfg(test)]
mod tests;
