//! Line-oriented readers and writers for postings, curated skills and career
//! sequences.
//!
//! Postings are one JSON object per line:
//!
//! ```text
//! {"id":"j1","title":"web developer","skills":["javascript"],"lat":33.75,"lon":-84.39,"kind":"posting"}
//! ```
//!
//! Curated skills are `title<TAB>skill1,skill2,...` and career sequences are
//! `person_id<TAB>title1|title2|...`.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use super::{
    normalize_token, CareerSequence, CuratedSkillTable, JobPosting, RecordKind, TruthLabel,
    Vocabulary,
};
use crate::geo::GeoPoint;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    /// Abort on the first bad record instead of skipping it.
    pub strict: bool,
}

#[derive(Debug, Default)]
pub struct ParsedPostings {
    pub postings: Vec<JobPosting>,
    /// Records skipped in lenient mode.
    pub rejected: Vec<Error>,
}

#[derive(Deserialize)]
struct RawRecord {
    id: String,
    title: Option<String>,
    #[serde(default)]
    skills: Vec<String>,
    lat: f64,
    lon: f64,
    #[serde(default)]
    kind: RecordKind,
}

#[derive(Serialize)]
struct OutRecord<'a> {
    id: &'a str,
    title: &'a str,
    skills: Vec<&'a str>,
    lat: f64,
    lon: f64,
    kind: RecordKind,
}

/// Parse a postings stream, interning titles and skills into the given
/// vocabularies. Rejected records leave the vocabularies untouched.
pub fn parse_postings<R: BufRead>(
    reader: R,
    titles: &mut Vocabulary,
    skills: &mut Vocabulary,
    opts: ParseOptions,
) -> Result<ParsedPostings> {
    let mut out = ParsedPostings::default();
    let mut seen_ids = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match parse_record(&line, line_no, &mut seen_ids, titles, skills) {
            Ok(p) => out.postings.push(p),
            Err(e) if opts.strict => return Err(e),
            Err(e) => {
                warn!("skipping record: {e}");
                out.rejected.push(e);
            }
        }
    }
    Ok(out)
}

fn parse_record(
    line: &str,
    line_no: usize,
    seen_ids: &mut HashSet<String>,
    titles: &mut Vocabulary,
    skills: &mut Vocabulary,
) -> Result<JobPosting> {
    let raw: RawRecord =
        serde_json::from_str(line).map_err(|e| Error::record(line_no, e.to_string()))?;
    let title = raw
        .title
        .as_deref()
        .map(normalize_token)
        .filter(|t| !t.is_empty())
        .ok_or_else(|| Error::record(line_no, format!("record {}: missing title", raw.id)))?;
    GeoPoint::new(raw.lat, raw.lon).map_err(|e| Error::record(line_no, e.to_string()))?;
    if seen_ids.contains(&raw.id) {
        return Err(Error::record(line_no, format!("duplicate id {}", raw.id)));
    }

    let title_id = titles.intern(&title);
    let mut skill_ids = Vec::with_capacity(raw.skills.len());
    for s in &raw.skills {
        if normalize_token(s).is_empty() {
            continue;
        }
        let id = skills.intern(s);
        if !skill_ids.contains(&id) {
            skill_ids.push(id);
        }
    }
    seen_ids.insert(raw.id.clone());
    Ok(JobPosting {
        id: raw.id,
        title_id,
        skill_ids,
        lat_deg: raw.lat,
        lon_deg: raw.lon,
        kind: raw.kind,
    })
}

pub fn read_postings_file(
    path: &Path,
    titles: &mut Vocabulary,
    skills: &mut Vocabulary,
    opts: ParseOptions,
) -> Result<ParsedPostings> {
    parse_postings(BufReader::new(File::open(path)?), titles, skills, opts)
}

pub fn write_postings<W: Write>(
    mut writer: W,
    postings: &[JobPosting],
    titles: &Vocabulary,
    skills: &Vocabulary,
) -> Result<()> {
    for p in postings {
        let title = titles.token(p.title_id).ok_or(Error::IdOutOfRange {
            what: "title",
            id: p.title_id,
            size: titles.len(),
        })?;
        let skill_names = p
            .skill_ids
            .iter()
            .map(|&s| {
                skills.token(s).ok_or(Error::IdOutOfRange {
                    what: "skill",
                    id: s,
                    size: skills.len(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let rec = OutRecord {
            id: &p.id,
            title,
            skills: skill_names,
            lat: p.lat_deg,
            lon: p.lon_deg,
            kind: p.kind,
        };
        serde_json::to_writer(&mut writer, &rec).map_err(std::io::Error::from)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

fn content_lines<R: BufRead>(reader: R) -> impl Iterator<Item = (usize, Result<String>)> {
    reader
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.map_err(Error::from)))
        .filter(|(_, l)| match l {
            Ok(s) => !s.trim().is_empty() && !s.starts_with('#'),
            Err(_) => true,
        })
}

/// Read `title<TAB>skill1,skill2,...` lines, interning both sides.
pub fn read_curated<R: BufRead>(
    reader: R,
    titles: &mut Vocabulary,
    skills: &mut Vocabulary,
) -> Result<CuratedSkillTable> {
    let mut table = CuratedSkillTable::new();
    for (line_no, line) in content_lines(reader) {
        let line = line?;
        let (title, list) = line
            .split_once('\t')
            .ok_or_else(|| Error::record(line_no, "expected title<TAB>skills"))?;
        if normalize_token(title).is_empty() {
            return Err(Error::record(line_no, "empty title"));
        }
        let names: Vec<&str> = list
            .split(',')
            .filter(|s| !normalize_token(s).is_empty())
            .collect();
        if names.is_empty() {
            return Err(Error::record(line_no, "empty skill list"));
        }
        let title_id = titles.intern(title);
        let ids = names.iter().map(|s| skills.intern(s)).collect();
        table.insert(title_id, ids)?;
    }
    Ok(table)
}

pub fn write_curated<W: Write>(
    mut writer: W,
    table: &CuratedSkillTable,
    titles: &Vocabulary,
    skills: &Vocabulary,
) -> Result<()> {
    for (title, list) in table.iter() {
        let names: Vec<&str> = list.iter().filter_map(|&s| skills.token(s)).collect();
        writeln!(
            writer,
            "{}\t{}",
            titles.token(title).unwrap_or_default(),
            names.join(",")
        )?;
    }
    Ok(())
}

/// Read `person_id<TAB>title1|title2|...` lines.
pub fn read_sequences<R: BufRead>(
    reader: R,
    titles: &mut Vocabulary,
) -> Result<Vec<CareerSequence>> {
    let mut out = Vec::new();
    for (line_no, line) in content_lines(reader) {
        let line = line?;
        let (person, history) = line
            .split_once('\t')
            .ok_or_else(|| Error::record(line_no, "expected person_id<TAB>titles"))?;
        let names: Vec<&str> = history
            .split('|')
            .filter(|s| !normalize_token(s).is_empty())
            .collect();
        if names.is_empty() {
            return Err(Error::record(line_no, "empty career sequence"));
        }
        out.push(CareerSequence {
            person_id: person.to_string(),
            titles: names.iter().map(|t| titles.intern(t)).collect(),
        });
    }
    Ok(out)
}

pub fn write_sequences<W: Write>(
    mut writer: W,
    sequences: &[CareerSequence],
    titles: &Vocabulary,
) -> Result<()> {
    for s in sequences {
        let names: Vec<&str> = s.titles.iter().filter_map(|&t| titles.token(t)).collect();
        writeln!(writer, "{}\t{}", s.person_id, names.join("|"))?;
    }
    Ok(())
}

/// `id<TAB>track<TAB>metro` ground-truth labels for synthetic corpora.
pub fn write_truth<W: Write>(
    mut writer: W,
    postings: &[JobPosting],
    truth: &[TruthLabel],
) -> Result<()> {
    for (p, t) in postings.iter().zip(truth) {
        writeln!(writer, "{}\t{}\t{}", p.id, t.track, t.metro)?;
    }
    Ok(())
}
