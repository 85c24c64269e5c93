//! Text embedding files and the loss trace.
//!
//! Embedding files start with a `count dim` line followed by one
//! `token v1 ... vdim` line per row. Tokens may contain single spaces, so the
//! last `dim` fields of a line are the values and everything before is the
//! token. Values carry 9 significant digits.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{EmbeddingSpace, LossReport, Matrix};
use crate::corpus::Vocabulary;
use crate::{Error, Result};

pub const TITLES_FILE: &str = "titles.vec";
pub const SKILLS_FILE: &str = "skills.vec";

pub fn write_embeddings<W: Write>(mut writer: W, vocab: &Vocabulary, matrix: &Matrix) -> Result<()> {
    if vocab.len() != matrix.rows() {
        return Err(Error::DimensionMismatch {
            expected: vocab.len(),
            actual: matrix.rows(),
        });
    }
    writeln!(writer, "{} {}", matrix.rows(), matrix.cols())?;
    for (i, token) in vocab.entries().iter().enumerate() {
        writer.write_all(token.as_bytes())?;
        for v in matrix.row(i) {
            write!(writer, " {v:.8e}")?;
        }
        writer.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_embeddings<R: BufRead>(reader: R) -> Result<(Vocabulary, Matrix)> {
    let mut lines = reader.lines();
    let header = lines.next().ok_or(Error::Empty("embedding file"))??;
    let mut fields = header.split_whitespace();
    let parse_count = |f: Option<&str>| -> Result<usize> {
        f.and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::record(1, "expected `count dim` header"))
    };
    let count = parse_count(fields.next())?;
    let dim = parse_count(fields.next())?;
    if fields.next().is_some() || dim == 0 {
        return Err(Error::record(1, "expected `count dim` header"));
    }

    let mut vocab = Vocabulary::new();
    let mut data = Vec::with_capacity(count * dim);
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(' ').collect();
        if parts.len() <= dim {
            return Err(Error::record(line_no, format!("expected a token and {dim} values")));
        }
        let (token, values) = parts.split_at(parts.len() - dim);
        let token = token.join(" ");
        if vocab.get(&token).is_some() {
            return Err(Error::record(line_no, format!("duplicate token {token:?}")));
        }
        if vocab.intern(&token) != vocab.len() - 1 {
            return Err(Error::record(line_no, "token does not normalize uniquely"));
        }
        for v in values {
            let v: f64 = v
                .parse()
                .map_err(|_| Error::record(line_no, format!("bad value {v:?}")))?;
            if !v.is_finite() {
                return Err(Error::record(line_no, "non-finite value"));
            }
            data.push(v);
        }
    }
    if vocab.len() != count {
        return Err(Error::Format(format!(
            "header announces {count} rows, found {}",
            vocab.len()
        )));
    }
    Ok((vocab, Matrix::from_vec(count, dim, data)?))
}

/// Embeddings together with the vocabularies that index their rows.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub titles: Vocabulary,
    pub skills: Vocabulary,
    pub space: EmbeddingSpace,
}

impl TrainedModel {
    pub fn new(titles: Vocabulary, skills: Vocabulary, space: EmbeddingSpace) -> Result<Self> {
        if titles.len() != space.num_titles() || skills.len() != space.num_skills() {
            return Err(Error::Format(
                "vocabulary sizes do not match embedding rows".into(),
            ));
        }
        Ok(TrainedModel { titles, skills, space })
    }

    /// Write `titles.vec` and `skills.vec` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        for (name, vocab, matrix) in [
            (TITLES_FILE, &self.titles, &self.space.titles),
            (SKILLS_FILE, &self.skills, &self.space.skills),
        ] {
            let mut w = BufWriter::new(File::create(dir.join(name))?);
            write_embeddings(&mut w, vocab, matrix)?;
            w.flush()?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let (titles, t) = read_embeddings(BufReader::new(File::open(dir.join(TITLES_FILE))?))?;
        let (skills, s) = read_embeddings(BufReader::new(File::open(dir.join(SKILLS_FILE))?))?;
        TrainedModel::new(titles, skills, EmbeddingSpace::new(t, s)?)
    }
}

/// CSV trace `epoch,o_jj,o_ss,o_js,reg,total,heldout_accuracy`.
pub fn write_loss_csv<W: Write>(mut writer: W, report: &LossReport) -> Result<()> {
    writeln!(writer, "epoch,o_jj,o_ss,o_js,reg,total,heldout_accuracy")?;
    for e in &report.entries {
        writeln!(
            writer,
            "{},{},{},{},{},{},{}",
            e.epoch, e.o_jj, e.o_ss, e.o_js, e.reg, e.total, e.heldout_accuracy
        )?;
    }
    Ok(())
}
