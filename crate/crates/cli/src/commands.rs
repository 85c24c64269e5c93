use std::collections::{HashMap, HashSet};
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Cursor, Write};
use std::path::{Path, PathBuf};

use jobvec::compose::{vectorize_corpus, vectorize_posting, VectorSet, VectorizeOptions};
use jobvec::corpus::{
    generate_synthetic, parse_postings, read_curated, read_postings_file, read_sequences, write_curated,
    write_postings, write_sequences, write_truth, CuratedSkillTable, JobPosting, ParseOptions, SynthConfig,
    Vocabulary,
};
use jobvec::eval::{evaluate_model, EvalConfig};
use jobvec::geo::haversine_miles;
use jobvec::index::{FlatIndex, Hit, Index, IvfPqIndex, IvfPqParams};
use jobvec::train::{train_corpus, write_loss_csv, TrainConfig, TrainedModel};
use jobvec::{Error, Result};
use log::{info, warn};

use crate::{EvaluateArgs, IndexArgs, IndexKind, QueryArgs, SynthArgs, TrainArgs, VectorFormat, VectorizeArgs};

pub const POSTINGS_FILE: &str = "postings.jsonl";
pub const SEQUENCES_FILE: &str = "sequences.tsv";
pub const CURATED_FILE: &str = "curated.tsv";
pub const TRUTH_FILE: &str = "truth.tsv";
pub const LOSS_FILE: &str = "loss.csv";
pub const REPORT_TABLE_FILE: &str = "report.txt";
pub const REPORT_KV_FILE: &str = "report.kv";

fn require_file(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::Io(io::Error::new(
            io::ErrorKind::NotFound,
            format!("{}: no such file", path.display()),
        )))
    }
}

fn require_dir(path: &Path) -> Result<()> {
    if path.is_dir() {
        Ok(())
    } else {
        Err(Error::Io(io::Error::new(
            io::ErrorKind::NotFound,
            format!("{}: no such directory", path.display()),
        )))
    }
}

/// Create the parent directory of an output file.
fn prepare_output(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => fs::create_dir_all(dir).map_err(Error::from),
        _ => Ok(()),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn log_rejected(path: &Path, rejected: &[Error]) {
    if !rejected.is_empty() {
        warn!("{}: skipped {} malformed records", path.display(), rejected.len());
        for e in rejected.iter().take(5) {
            warn!("  {e}");
        }
    }
}

pub fn synth(a: &SynthArgs) -> Result<()> {
    let cfg = SynthConfig {
        tracks: a.tracks,
        titles_per_track: a.titles_per_track,
        skills_per_track: a.skills_per_track,
        skills_per_title: a.skills_per_title,
        skills_per_posting: a.skills_per_posting,
        metros: a.metros,
        min_metro_separation_miles: a.min_metro_separation,
        postings: a.postings,
        sequences: a.sequences,
        max_sequence_len: a.max_sequence_len,
        jitter_miles: a.jitter_miles,
        noise: a.noise,
        missing_skill_rate: a.missing_skill_rate,
        resume_fraction: a.resume_fraction,
        title_skew: a.title_skew,
    };
    cfg.validate()?;
    fs::create_dir_all(&a.out)?;
    info!("synth seed={} postings={} tracks={} metros={}", a.seed, a.postings, a.tracks, a.metros);
    let s = generate_synthetic(&cfg, a.seed)?;

    let mut w = create(&a.out.join(POSTINGS_FILE))?;
    write_postings(&mut w, &s.postings, &s.titles, &s.skills)?;
    w.flush()?;
    let mut w = create(&a.out.join(SEQUENCES_FILE))?;
    write_sequences(&mut w, &s.sequences, &s.titles)?;
    w.flush()?;
    let mut w = create(&a.out.join(CURATED_FILE))?;
    write_curated(&mut w, &s.curated, &s.titles, &s.skills)?;
    w.flush()?;
    let mut w = create(&a.out.join(TRUTH_FILE))?;
    write_truth(&mut w, &s.postings, &s.truth)?;
    w.flush()?;
    for (i, c) in s.metro_centers.iter().enumerate() {
        info!("metro {i}: {:.4}, {:.4}", c.lat_deg(), c.lon_deg());
    }
    Ok(())
}

fn input_path(explicit: &Option<PathBuf>, data: &Option<PathBuf>, name: &str) -> Result<PathBuf> {
    match (explicit, data) {
        (Some(p), _) => Ok(p.clone()),
        (None, Some(dir)) => Ok(dir.join(name)),
        (None, None) => Err(Error::Config(format!("give --data or the path of {name}"))),
    }
}

pub fn train(a: &TrainArgs) -> Result<()> {
    let postings_path = input_path(&a.postings, &a.data, POSTINGS_FILE)?;
    let sequences_path = input_path(&a.sequences, &a.data, SEQUENCES_FILE)?;
    let cfg = TrainConfig {
        dim: a.dim,
        lambda: a.lambda,
        learning_rate: a.lr,
        epochs: a.epochs,
        triplets_per_epoch: a.triplets_per_epoch,
        seed: a.seed,
        init_scale: a.init_scale,
        ..TrainConfig::default()
    };
    cfg.validate()?;
    require_file(&postings_path)?;
    require_file(&sequences_path)?;
    fs::create_dir_all(&a.out)?;

    let mut titles = Vocabulary::new();
    let mut skills = Vocabulary::new();
    let parsed = read_postings_file(&postings_path, &mut titles, &mut skills, ParseOptions { strict: a.strict })?;
    log_rejected(&postings_path, &parsed.rejected);
    let sequences = read_sequences(BufReader::new(File::open(&sequences_path)?), &mut titles)?;
    info!(
        "train seed={} dim={} lambda={} lr={} epochs={} on {} postings, {} sequences",
        cfg.seed,
        cfg.dim,
        cfg.lambda,
        cfg.learning_rate,
        cfg.epochs,
        parsed.postings.len(),
        sequences.len()
    );
    let (space, report) = train_corpus(&parsed.postings, &sequences, titles.len(), skills.len(), &cfg)?;
    if let Some(last) = report.last() {
        info!(
            "final held-out loss {:.4}, accuracy {:.4} (job-job {:.4}, skill-skill {:.4}, job-skill {:.4})",
            last.total, last.heldout_accuracy, last.accuracy_by_kind[0], last.accuracy_by_kind[1], last.accuracy_by_kind[2]
        );
    }
    TrainedModel::new(titles, skills, space)?.save(&a.out)?;
    let mut w = create(&a.out.join(LOSS_FILE))?;
    write_loss_csv(&mut w, &report)?;
    w.flush()?;
    Ok(())
}

/// Postings and curated table parsed against the model vocabularies.
struct ModelInputs {
    model: TrainedModel,
    titles: Vocabulary,
    skills: Vocabulary,
    curated: Option<CuratedSkillTable>,
}

fn load_model(dir: &Path, curated: Option<&Path>) -> Result<ModelInputs> {
    require_dir(dir)?;
    if let Some(p) = curated {
        require_file(p)?;
    }
    let model = TrainedModel::load(dir)?;
    let mut titles = model.titles.clone();
    let mut skills = model.skills.clone();
    let curated = match curated {
        Some(p) => Some(read_curated(BufReader::new(File::open(p)?), &mut titles, &mut skills)?),
        None => None,
    };
    Ok(ModelInputs {
        model,
        titles,
        skills,
        curated,
    })
}

pub fn vectorize(a: &VectorizeArgs) -> Result<()> {
    let opts = VectorizeOptions {
        w_loc: a.w_loc,
        lenient: a.lenient,
    };
    if !(a.w_loc >= 0.0 && a.w_loc.is_finite()) {
        return Err(Error::Config(format!("--w-loc must be finite and >= 0, got {}", a.w_loc)));
    }
    require_file(&a.postings)?;
    let mut m = load_model(&a.model, a.curated.as_deref())?;
    prepare_output(&a.out)?;

    let parsed = read_postings_file(&a.postings, &mut m.titles, &mut m.skills, ParseOptions { strict: !a.lenient })?;
    log_rejected(&a.postings, &parsed.rejected);
    let rows = m.model.space.num_titles();
    let mut postings = Vec::with_capacity(parsed.postings.len());
    for p in parsed.postings {
        if p.title_id < rows {
            postings.push(p);
            continue;
        }
        let err = Error::UnknownTitle {
            id: p.id.clone(),
            title: m.titles.token(p.title_id).unwrap_or_default().to_string(),
        };
        if !a.lenient {
            return Err(err);
        }
        warn!("{err}; skipped");
    }
    let vectors = vectorize_corpus(&postings, &m.model.space, m.curated.as_ref(), &opts)?;
    let ids: Vec<&str> = postings.iter().map(|p| p.id.as_str()).collect();
    let set = VectorSet::from_job_vectors(&ids, &vectors)?;
    info!("vectorized {} postings to dim {} (w_loc={})", set.len(), set.dim(), a.w_loc);
    match a.format {
        VectorFormat::Bin => set.save(&a.out)?,
        VectorFormat::Text => {
            let mut w = create(&a.out)?;
            set.write_text(&mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}

pub fn index(a: &IndexArgs) -> Result<()> {
    require_file(&a.vectors)?;
    let params = IvfPqParams {
        nlist: a.nlist,
        m: a.m,
        nprobe: a.nprobe_default,
        kmeans_iters: a.kmeans_iters,
        seed: a.seed,
    };
    if a.kind == IndexKind::Ivfpq {
        params.validate()?;
    }
    prepare_output(&a.out)?;
    let set = VectorSet::load(&a.vectors)?;
    let index = match a.kind {
        IndexKind::Flat => Index::Flat(FlatIndex::from_vector_set(&set)?),
        IndexKind::Ivfpq => {
            info!(
                "ivfpq seed={} nlist={} m={} nprobe={} padded dim {}",
                a.seed,
                a.nlist,
                a.m,
                a.nprobe_default,
                params.padded_dim(set.dim())
            );
            Index::IvfPq(IvfPqIndex::from_vector_set(&set, params)?)
        }
    };
    index.save(&a.out)?;
    info!("{} index over {} vectors written to {}", index.kind_name(), set.len(), a.out.display());
    Ok(())
}

/// Top `k` hits, skipping the query's own id. `nprobe` applies to IVF-PQ only.
fn search_excluding(index: &Index, query: &[f32], k: usize, nprobe: Option<usize>, exclude: &str) -> Result<Vec<Hit>> {
    let hits = match (index, nprobe) {
        (Index::IvfPq(ivf), Some(n)) => ivf.search_nprobe(query, k + 1, n)?,
        _ => index.as_ann().search(query, k + 1)?,
    };
    let ann = index.as_ann();
    Ok(hits.into_iter().filter(|h| ann.id(h.pos) != exclude).take(k).collect())
}

pub fn query(a: &QueryArgs) -> Result<()> {
    for p in [&a.index, &a.vectors, &a.postings] {
        require_file(p)?;
    }
    if let Some(p) = &a.compare {
        require_file(p)?;
    }
    let index = Index::load(&a.index)?;
    let set = VectorSet::load(&a.vectors)?;

    let (mut titles, mut skills, model) = match &a.model {
        Some(dir) => {
            let m = load_model(dir, a.curated.as_deref())?;
            (m.titles.clone(), m.skills.clone(), Some(m))
        }
        None => (Vocabulary::new(), Vocabulary::new(), None),
    };
    let parsed = read_postings_file(&a.postings, &mut titles, &mut skills, ParseOptions::default())?;
    log_rejected(&a.postings, &parsed.rejected);
    let by_id: HashMap<&str, &JobPosting> = parsed.postings.iter().map(|p| (p.id.as_str(), p)).collect();

    let (query_posting, query_vector): (JobPosting, Vec<f32>) = match (&a.id, &a.record) {
        (Some(id), _) => {
            let posting = (*by_id.get(id.as_str()).ok_or_else(|| Error::UnknownId(id.clone()))?).clone();
            let pos = set
                .positions_by_id()
                .get(id.as_str())
                .copied()
                .ok_or_else(|| Error::UnknownId(id.clone()))?;
            (posting, set.vector(pos).to_vec())
        }
        (None, Some(record)) => {
            let m = model.as_ref().ok_or_else(|| Error::Config("--record needs --model".into()))?;
            let parsed = parse_postings(Cursor::new(record.as_bytes()), &mut titles, &mut skills, ParseOptions { strict: true })?;
            let posting = parsed.postings.into_iter().next().ok_or(Error::Empty("inline record"))?;
            if posting.title_id >= m.model.space.num_titles() {
                return Err(Error::UnknownTitle {
                    id: posting.id.clone(),
                    title: titles.token(posting.title_id).unwrap_or_default().to_string(),
                });
            }
            let opts = VectorizeOptions {
                w_loc: a.w_loc,
                lenient: false,
            };
            let v = vectorize_posting(&posting, &m.model.space, m.curated.as_ref(), &opts)?;
            let v: Vec<f32> = v.full().iter().map(|&x| x as f32).collect();
            (posting, v)
        }
        (None, None) => return Err(Error::Config("give --id or --record".into())),
    };

    let results = |idx: &Index| search_excluding(idx, &query_vector, a.k, a.nprobe, &query_posting.id);
    let hits = results(&index)?;
    let ann = index.as_ann();
    let stdout = io::stdout();
    let mut out = stdout.lock();
    for (rank, h) in hits.iter().enumerate() {
        let id = ann.id(h.pos);
        let rec = by_id.get(id).ok_or_else(|| Error::UnknownId(id.to_string()))?;
        writeln!(
            out,
            "{} {} {:.6} {:.3} {}",
            rank + 1,
            id,
            h.distance,
            haversine_miles(query_posting.location(), rec.location()),
            rec.title_id == query_posting.title_id
        )?;
    }
    if let Some(path) = &a.compare {
        let other = Index::load(path)?;
        let other_hits = results(&other)?;
        let mine: HashSet<&str> = hits.iter().map(|h| ann.id(h.pos)).collect();
        let overlap = other_hits
            .iter()
            .filter(|h| mine.contains(other.as_ann().id(h.pos)))
            .count();
        writeln!(out, "overlap={overlap}/{}", other_hits.len())?;
    }
    Ok(())
}

pub fn evaluate(a: &EvaluateArgs) -> Result<()> {
    for p in [&a.index, &a.vectors, &a.postings] {
        require_file(p)?;
    }
    if a.k == 0 {
        return Err(Error::Config("--k must be at least 1".into()));
    }
    if !(a.radius >= 0.0 && a.radius.is_finite()) {
        return Err(Error::Config(format!("--radius must be finite and >= 0, got {}", a.radius)));
    }
    let index = Index::load(&a.index)?;
    let set = VectorSet::load(&a.vectors)?;
    let mut titles = Vocabulary::new();
    let mut skills = Vocabulary::new();
    let parsed = read_postings_file(&a.postings, &mut titles, &mut skills, ParseOptions::default())?;
    log_rejected(&a.postings, &parsed.rejected);

    // Line the postings up with the vector rows.
    let mut by_id: HashMap<String, JobPosting> = parsed.postings.into_iter().map(|p| (p.id.clone(), p)).collect();
    let postings = set
        .ids()
        .iter()
        .map(|id| by_id.remove(id).ok_or_else(|| Error::UnknownId(id.clone())))
        .collect::<Result<Vec<_>>>()?;

    let cfg = EvalConfig {
        k: a.k,
        queries: a.queries,
        radius_miles: a.radius,
        seed: a.seed,
    };
    info!("evaluate seed={} queries={} k={} radius={}", a.seed, a.queries, a.k, a.radius);
    let report = evaluate_model(&postings, &set, index.as_ann(), &cfg)?;
    let label = format!("{} ({} index, seed {})", a.label, index.kind_name(), a.seed);

    let stdout = io::stdout();
    report.write_table(stdout.lock(), &label)?;
    if let Some(dir) = &a.out {
        fs::create_dir_all(dir)?;
        let mut w = create(&dir.join(REPORT_TABLE_FILE))?;
        report.write_table(&mut w, &label)?;
        w.flush()?;
        let mut w = create(&dir.join(REPORT_KV_FILE))?;
        writeln!(w, "seed={}", a.seed)?;
        writeln!(w, "index={}", index.kind_name())?;
        report.write_kv(&mut w)?;
        w.flush()?;
    }
    Ok(())
}
