//! Synthetic corpora with planted career tracks and metro areas.
//!
//! Each track owns a block of titles and skills. Every title gets a fixed
//! skill profile (which doubles as its curated skill list), postings draw a
//! subset of their title's profile, and career sequences move between titles
//! of one track. Locations are Gaussian-jittered around a handful of metro
//! centers placed inside the continental US bounding box.

use rand::seq::index;
use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{CareerSequence, CuratedSkillTable, JobPosting, RecordKind, Vocabulary};
use crate::geo::{haversine_miles, GeoPoint, EARTH_RADIUS_MILES};
use crate::rng::stream_rng;
use crate::{Error, Result};

const MAX_METRO_ATTEMPTS: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub tracks: usize,
    pub titles_per_track: usize,
    pub skills_per_track: usize,
    /// Size of each title's skill profile.
    pub skills_per_title: usize,
    /// Skills listed on one posting, drawn from its title's profile.
    pub skills_per_posting: usize,
    pub metros: usize,
    pub min_metro_separation_miles: f64,
    pub postings: usize,
    pub sequences: usize,
    pub max_sequence_len: usize,
    /// Standard deviation of the per-axis location jitter around a metro center.
    pub jitter_miles: f64,
    /// Rate of cross-track noise skills and career transitions.
    pub noise: f64,
    /// Fraction of postings that list no skills at all.
    pub missing_skill_rate: f64,
    pub resume_fraction: f64,
    /// Zipf exponent of title popularity within a track; role `j` is drawn
    /// with weight `(j + 1)^-title_skew`. Zero draws titles uniformly.
    pub title_skew: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            tracks: 20,
            titles_per_track: 5,
            skills_per_track: 12,
            skills_per_title: 6,
            skills_per_posting: 4,
            metros: 5,
            min_metro_separation_miles: 500.0,
            postings: 10_000,
            sequences: 2_000,
            max_sequence_len: 5,
            jitter_miles: 10.0,
            noise: 0.02,
            missing_skill_rate: 0.05,
            resume_fraction: 0.0,
            title_skew: 0.0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.tracks == 0 {
            return bad("tracks must be at least 1");
        }
        if self.titles_per_track == 0 || self.skills_per_track == 0 {
            return bad("titles_per_track and skills_per_track must be at least 1");
        }
        if self.skills_per_title == 0 || self.skills_per_title > self.skills_per_track {
            return bad("skills_per_title must be in 1..=skills_per_track");
        }
        if self.skills_per_posting == 0 || self.skills_per_posting > self.skills_per_title {
            return bad("skills_per_posting must be in 1..=skills_per_title");
        }
        if self.metros == 0 || self.postings == 0 {
            return bad("metros and postings must be at least 1");
        }
        if self.max_sequence_len < 2 {
            return bad("max_sequence_len must be at least 2");
        }
        if !(self.jitter_miles >= 0.0 && self.jitter_miles.is_finite()) {
            return bad("jitter_miles must be finite and non-negative");
        }
        if self.min_metro_separation_miles.is_nan() || self.min_metro_separation_miles < 0.0 {
            return bad("min_metro_separation_miles must be non-negative");
        }
        if !(0.0..1.0).contains(&self.noise) {
            return bad("noise must be in [0, 1)");
        }
        if !(0.0..=1.0).contains(&self.missing_skill_rate)
            || !(0.0..=1.0).contains(&self.resume_fraction)
        {
            return bad("missing_skill_rate and resume_fraction must be in [0, 1]");
        }
        if !(self.title_skew >= 0.0 && self.title_skew.is_finite()) {
            return bad("title_skew must be finite and non-negative");
        }
        Ok(())
    }

    pub fn num_titles(&self) -> usize {
        self.tracks * self.titles_per_track
    }

    pub fn num_skills(&self) -> usize {
        self.tracks * self.skills_per_track
    }

    pub fn track_of_title(&self, title_id: usize) -> usize {
        title_id / self.titles_per_track
    }

    pub fn track_of_skill(&self, skill_id: usize) -> usize {
        skill_id / self.skills_per_track
    }
}

/// Ground truth behind one generated posting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TruthLabel {
    pub track: usize,
    pub metro: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub config: SynthConfig,
    pub titles: Vocabulary,
    pub skills: Vocabulary,
    pub postings: Vec<JobPosting>,
    pub sequences: Vec<CareerSequence>,
    pub truth: Vec<TruthLabel>,
    pub curated: CuratedSkillTable,
    pub metro_centers: Vec<GeoPoint>,
}

// Independent streams so that, e.g., changing the sequence count leaves the
// postings untouched.
const STREAM_LAYOUT: u64 = 1;
const STREAM_POSTINGS: u64 = 2;
const STREAM_SEQUENCES: u64 = 3;

pub fn generate_synthetic(cfg: &SynthConfig, seed: u64) -> Result<SyntheticCorpus> {
    cfg.validate()?;

    let titles: Vocabulary = (0..cfg.tracks)
        .flat_map(|t| (0..cfg.titles_per_track).map(move |j| format!("track {t:02} role {j:02}")))
        .collect();
    let skills: Vocabulary = (0..cfg.tracks)
        .flat_map(|t| (0..cfg.skills_per_track).map(move |j| format!("track {t:02} skill {j:02}")))
        .collect();

    let mut layout_rng = stream_rng(seed, STREAM_LAYOUT);
    let mut profiles = Vec::with_capacity(cfg.num_titles());
    let mut curated = CuratedSkillTable::new();
    for title in 0..cfg.num_titles() {
        let base = cfg.track_of_title(title) * cfg.skills_per_track;
        let mut picks = index::sample(&mut layout_rng, cfg.skills_per_track, cfg.skills_per_title)
            .into_vec();
        picks.sort_unstable();
        let profile: Vec<usize> = picks.into_iter().map(|s| base + s).collect();
        curated.insert(title, profile.clone())?;
        profiles.push(profile);
    }
    let metro_centers = place_metros(cfg, &mut layout_rng)?;

    let role_weights: Vec<f64> = (0..cfg.titles_per_track)
        .map(|j| ((j + 1) as f64).powf(-cfg.title_skew))
        .collect();
    let roles = WeightedIndex::new(&role_weights).map_err(|e| Error::Config(e.to_string()))?;
    let mut rng = stream_rng(seed, STREAM_POSTINGS);
    let jitter = Normal::new(0.0, cfg.jitter_miles).map_err(|e| Error::Config(e.to_string()))?;
    let miles_per_degree = EARTH_RADIUS_MILES.to_radians();
    let mut postings = Vec::with_capacity(cfg.postings);
    let mut truth = Vec::with_capacity(cfg.postings);
    for i in 0..cfg.postings {
        let track = rng.random_range(0..cfg.tracks);
        let title_id = track * cfg.titles_per_track + roles.sample(&mut rng);
        let metro = rng.random_range(0..cfg.metros);

        let mut skill_ids = Vec::new();
        if !rng.random_bool(cfg.missing_skill_rate) {
            let profile = &profiles[title_id];
            let mut picks = index::sample(&mut rng, profile.len(), cfg.skills_per_posting).into_vec();
            picks.sort_unstable();
            skill_ids.extend(picks.into_iter().map(|k| profile[k]));
            if cfg.tracks > 1 && rng.random_bool(cfg.noise) {
                let other = other_track(&mut rng, track, cfg.tracks);
                skill_ids.push(other * cfg.skills_per_track + rng.random_range(0..cfg.skills_per_track));
            }
        }

        let center = metro_centers[metro];
        let north = jitter.sample(&mut rng);
        let east = jitter.sample(&mut rng);
        let lat = (center.lat_deg() + north / miles_per_degree).clamp(-89.9, 89.9);
        let lon = wrap_longitude(
            center.lon_deg() + east / (miles_per_degree * lat.to_radians().cos()),
        );
        let kind = if rng.random_bool(cfg.resume_fraction) {
            RecordKind::Resume
        } else {
            RecordKind::Posting
        };

        postings.push(JobPosting {
            id: format!("p{i:06}"),
            title_id,
            skill_ids,
            lat_deg: lat,
            lon_deg: lon,
            kind,
        });
        truth.push(TruthLabel { track, metro });
    }

    let mut rng = stream_rng(seed, STREAM_SEQUENCES);
    let mut sequences = Vec::with_capacity(cfg.sequences);
    for person in 0..cfg.sequences {
        let len = rng.random_range(2..=cfg.max_sequence_len);
        let mut track = rng.random_range(0..cfg.tracks);
        let mut current = track * cfg.titles_per_track + rng.random_range(0..cfg.titles_per_track);
        let mut history = vec![current];
        for _ in 1..len {
            if cfg.tracks > 1 && rng.random_bool(cfg.noise) {
                track = other_track(&mut rng, track, cfg.tracks);
                current = track * cfg.titles_per_track + rng.random_range(0..cfg.titles_per_track);
            } else if cfg.titles_per_track > 1 {
                let offset = current - track * cfg.titles_per_track;
                let step = rng.random_range(1..cfg.titles_per_track);
                current = track * cfg.titles_per_track + (offset + step) % cfg.titles_per_track;
            }
            history.push(current);
        }
        sequences.push(CareerSequence {
            person_id: format!("u{person:05}"),
            titles: history,
        });
    }

    Ok(SyntheticCorpus {
        config: cfg.clone(),
        titles,
        skills,
        postings,
        sequences,
        truth,
        curated,
        metro_centers,
    })
}

fn other_track(rng: &mut impl Rng, track: usize, tracks: usize) -> usize {
    (track + rng.random_range(1..tracks)) % tracks
}

fn wrap_longitude(lon: f64) -> f64 {
    let wrapped = (lon + 180.0).rem_euclid(360.0) - 180.0;
    wrapped.clamp(-180.0, 180.0)
}

fn place_metros(cfg: &SynthConfig, rng: &mut impl Rng) -> Result<Vec<GeoPoint>> {
    let mut centers: Vec<GeoPoint> = Vec::with_capacity(cfg.metros);
    let mut attempts = 0;
    while centers.len() < cfg.metros {
        attempts += 1;
        if attempts > MAX_METRO_ATTEMPTS {
            return Err(Error::Config(format!(
                "cannot place {} metros at least {} miles apart",
                cfg.metros, cfg.min_metro_separation_miles
            )));
        }
        let candidate = GeoPoint::new(rng.random_range(26.0..48.0), rng.random_range(-122.0..-71.0))?;
        if centers
            .iter()
            .all(|c| haversine_miles(*c, candidate) >= cfg.min_metro_separation_miles)
        {
            centers.push(candidate);
        }
    }
    Ok(centers)
}
