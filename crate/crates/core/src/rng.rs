use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Deterministic generator for one named stream derived from a master seed.
///
/// Streams keep independent consumers (per-epoch triplets, held-out samples,
/// k-means restarts) from perturbing one another.
pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
