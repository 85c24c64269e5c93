//! Job recommendation from jointly embedded job titles and skills.
//!
//! The pipeline runs in six stages, each in its own module:
//!
//! 1. [`corpus`]: ingest postings/resumes (or synthesize a planted corpus),
//!    intern titles and skills, and load curated fallback skill lists.
//! 2. [`graphs`]: build the job-job transition, skill-skill co-occurrence and
//!    job-skill graphs, and sample BPR triplets from them.
//! 3. [`train`]: learn title and skill vectors in one latent space by SGD on
//!    the joint pairwise ranking objective with L2 regularization.
//! 4. [`geo`] and [`compose`]: fold a posting's title and skill vectors into
//!    one semantic vector and append a weighted unit-sphere location block.
//! 5. [`index`]: exact flat and IVF-PQ nearest-neighbour search.
//! 6. [`eval`]: distance, in-range, title-match and coverage metrics over the
//!    top-k recommendations.

pub mod compose;
pub mod corpus;
mod error;
pub mod eval;
pub mod geo;
pub mod graphs;
pub mod index;
mod rng;
pub mod train;

pub use error::{Error, ErrorClass, Result};
