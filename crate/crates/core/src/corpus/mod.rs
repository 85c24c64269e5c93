//! Postings, vocabularies and curated skill lists.

mod ingest;
mod synth;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::geo::GeoPoint;
use crate::{Error, Result};

pub use ingest::{
    parse_postings, read_curated, read_postings_file, read_sequences, write_curated,
    write_postings, write_sequences, write_truth, ParseOptions, ParsedPostings,
};
pub use synth::{generate_synthetic, SynthConfig, SyntheticCorpus, TruthLabel};

/// Lowercase and collapse internal whitespace.
pub fn normalize_token(raw: &str) -> String {
    raw.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RecordKind {
    #[default]
    Posting,
    Resume,
}

/// One job posting or resume after interning.
#[derive(Debug, Clone, PartialEq)]
pub struct JobPosting {
    pub id: String,
    pub title_id: usize,
    pub skill_ids: Vec<usize>,
    pub lat_deg: f64,
    pub lon_deg: f64,
    pub kind: RecordKind,
}

impl JobPosting {
    pub fn location(&self) -> GeoPoint {
        // Constructors validate ranges, so this cannot fail for well-formed postings.
        GeoPoint::new(self.lat_deg, self.lon_deg).expect("posting coordinates validated")
    }

    /// Check the posting invariants against vocabulary sizes.
    pub fn validate(&self, num_titles: usize, num_skills: usize) -> Result<()> {
        GeoPoint::new(self.lat_deg, self.lon_deg)?;
        if self.title_id >= num_titles {
            return Err(Error::IdOutOfRange {
                what: "title",
                id: self.title_id,
                size: num_titles,
            });
        }
        let mut seen = std::collections::HashSet::new();
        for &s in &self.skill_ids {
            if s >= num_skills {
                return Err(Error::IdOutOfRange {
                    what: "skill",
                    id: s,
                    size: num_skills,
                });
            }
            if !seen.insert(s) {
                return Err(Error::Format(format!(
                    "record {}: duplicate skill id {s}",
                    self.id
                )));
            }
        }
        Ok(())
    }
}

/// Append-only interner from normalized strings to dense ids.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Vocabulary {
    entries: Vec<String>,
    lookup: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Intern `raw` after normalization, returning its id.
    pub fn intern(&mut self, raw: &str) -> usize {
        let token = normalize_token(raw);
        if let Some(&id) = self.lookup.get(&token) {
            return id;
        }
        let id = self.entries.len();
        self.lookup.insert(token.clone(), id);
        self.entries.push(token);
        id
    }

    pub fn get(&self, raw: &str) -> Option<usize> {
        self.lookup.get(&normalize_token(raw)).copied()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.entries.get(id).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[String] {
        &self.entries
    }
}

impl<S: AsRef<str>> FromIterator<S> for Vocabulary {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        let mut vocab = Vocabulary::new();
        for s in iter {
            vocab.intern(s.as_ref());
        }
        vocab
    }
}

/// Curated top skills per title, used when a record lists no skills.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CuratedSkillTable {
    map: BTreeMap<usize, Vec<usize>>,
}

impl CuratedSkillTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, title_id: usize, skills: Vec<usize>) -> Result<()> {
        if skills.is_empty() {
            return Err(Error::Empty("curated skill list"));
        }
        let mut deduped = Vec::with_capacity(skills.len());
        for s in skills {
            if !deduped.contains(&s) {
                deduped.push(s);
            }
        }
        self.map.insert(title_id, deduped);
        Ok(())
    }

    pub fn get(&self, title_id: usize) -> Option<&[usize]> {
        self.map.get(&title_id).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &[usize])> {
        self.map.iter().map(|(&t, s)| (t, s.as_slice()))
    }
}

/// Chronological job history of one person.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CareerSequence {
    pub person_id: String,
    pub titles: Vec<usize>,
}

/// Skills to vectorize a posting with: its own list, or the curated list for
/// its title when it has none.
pub fn fallback_skills<'a>(
    posting: &'a JobPosting,
    table: Option<&'a CuratedSkillTable>,
) -> Result<&'a [usize]> {
    if !posting.skill_ids.is_empty() {
        return Ok(&posting.skill_ids);
    }
    table
        .and_then(|t| t.get(posting.title_id))
        .ok_or_else(|| Error::UnresolvableSkills {
            id: posting.id.clone(),
        })
}
