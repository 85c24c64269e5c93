//! `jobvec`: synthesize or ingest postings, train title and skill
//! embeddings, vectorize, index, query and evaluate.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use jobvec::{Error, ErrorClass};

const SUBCOMMANDS: &[&str] = &["synth", "train", "vectorize", "index", "query", "evaluate"];

#[derive(Debug, Parser)]
#[command(name = "jobvec", version, about, args_override_self = true)]
struct Cli {
    /// More log output (repeat for debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    /// Only log errors.
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic corpus with planted career tracks and metros.
    Synth(SynthArgs),
    /// Build the relation graphs and train title and skill embeddings.
    Train(TrainArgs),
    /// Compose one vector per posting from trained embeddings.
    Vectorize(VectorizeArgs),
    /// Build a flat or IVF-PQ index over vectorized postings.
    Index(IndexArgs),
    /// Print the nearest postings for one query.
    Query(QueryArgs),
    /// Score recommendations for sampled queries.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory for postings.jsonl, sequences.tsv, curated.tsv, truth.tsv.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    pub postings: usize,
    #[arg(long, default_value_t = 20)]
    pub tracks: usize,
    #[arg(long, default_value_t = 5)]
    pub titles_per_track: usize,
    #[arg(long, default_value_t = 12)]
    pub skills_per_track: usize,
    #[arg(long, default_value_t = 6)]
    pub skills_per_title: usize,
    #[arg(long, default_value_t = 4)]
    pub skills_per_posting: usize,
    #[arg(long, default_value_t = 5)]
    pub metros: usize,
    #[arg(long, default_value_t = 500.0)]
    pub min_metro_separation: f64,
    #[arg(long, default_value_t = 2_000)]
    pub sequences: usize,
    #[arg(long, default_value_t = 5)]
    pub max_sequence_len: usize,
    #[arg(long, default_value_t = 10.0)]
    pub jitter_miles: f64,
    #[arg(long, default_value_t = 0.02)]
    pub noise: f64,
    #[arg(long, default_value_t = 0.05)]
    pub missing_skill_rate: f64,
    #[arg(long, default_value_t = 0.0)]
    pub resume_fraction: f64,
    #[arg(long, default_value_t = 0.0)]
    pub title_skew: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Directory holding postings.jsonl and sequences.tsv.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub postings: Option<PathBuf>,
    #[arg(long)]
    pub sequences: Option<PathBuf>,
    /// Model directory for titles.vec, skills.vec and loss.csv.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 50)]
    pub dim: usize,
    #[arg(long, default_value_t = 0.001)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0.05)]
    pub lr: f64,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    /// Triplets per graph per epoch; defaults to each graph's edge count.
    #[arg(long)]
    pub triplets_per_epoch: Option<usize>,
    #[arg(long)]
    pub init_scale: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Abort on the first malformed record instead of skipping it.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum VectorFormat {
    Bin,
    Text,
}

#[derive(Debug, Args)]
pub struct VectorizeArgs {
    #[arg(long)]
    pub postings: PathBuf,
    /// Model directory written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    /// Curated `title<TAB>skills` table used when a posting lists no known skill.
    #[arg(long)]
    pub curated: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub w_loc: f64,
    /// Skip malformed records and fall back to the bare title vector.
    #[arg(long)]
    pub lenient: bool,
    #[arg(long, value_enum, default_value_t = VectorFormat::Bin)]
    pub format: VectorFormat,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum IndexKind {
    Flat,
    Ivfpq,
}

#[derive(Debug, Args)]
pub struct IndexArgs {
    #[arg(long)]
    pub vectors: PathBuf,
    #[arg(long, value_enum, default_value_t = IndexKind::Flat)]
    pub kind: IndexKind,
    #[arg(long, default_value_t = 256)]
    pub nlist: usize,
    #[arg(long, default_value_t = 16)]
    pub m: usize,
    #[arg(long, default_value_t = 16)]
    pub nprobe_default: usize,
    #[arg(long, default_value_t = 25)]
    pub kmeans_iters: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    #[arg(long)]
    pub index: PathBuf,
    #[arg(long)]
    pub vectors: PathBuf,
    #[arg(long)]
    pub postings: PathBuf,
    /// Id of a corpus posting to query with.
    #[arg(long, conflicts_with = "record", required_unless_present = "record")]
    pub id: Option<String>,
    /// Inline JSON posting; needs `--model`.
    #[arg(long, requires = "model")]
    pub record: Option<String>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub curated: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    pub w_loc: f64,
    #[arg(long, default_value_t = 50)]
    pub k: usize,
    /// Lists to probe (IVF-PQ only); defaults to the index setting.
    #[arg(long)]
    pub nprobe: Option<usize>,
    /// Second index to report result overlap against.
    #[arg(long)]
    pub compare: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub index: PathBuf,
    #[arg(long)]
    pub vectors: PathBuf,
    #[arg(long)]
    pub postings: PathBuf,
    /// Directory for report.txt and report.kv.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 500)]
    pub queries: usize,
    #[arg(long, default_value_t = 50)]
    pub k: usize,
    #[arg(long, default_value_t = 50.0)]
    pub radius: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Name printed in the report header.
    #[arg(long, default_value = "model")]
    pub label: String,
}

fn exit_code(class: ErrorClass) -> u8 {
    match class {
        ErrorClass::Usage => 1,
        ErrorClass::Data => 2,
        ErrorClass::Numerical => 3,
    }
}

fn main() -> ExitCode {
    let args = match config::merge_args(std::env::args_os().collect(), SUBCOMMANDS) {
        Ok(args) => args,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };

    let level = match (cli.quiet, cli.verbose) {
        (true, _) => log::LevelFilter::Error,
        (false, 0) => log::LevelFilter::Info,
        (false, 1) => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .init();

    let result: Result<(), Error> = match cli.command {
        Command::Synth(a) => commands::synth(&a),
        Command::Train(a) => commands::train(&a),
        Command::Vectorize(a) => commands::vectorize(&a),
        Command::Index(a) => commands::index(&a),
        Command::Query(a) => commands::query(&a),
        Command::Evaluate(a) => commands::evaluate(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.class()))
        }
    }
}
