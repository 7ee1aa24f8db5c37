//! Counter-derived random streams.
//!
//! Every random consumer draws from a ChaCha8 generator keyed by the master
//! seed, on a stream number derived from a domain tag and a counter (block
//! index, bootstrap replicate, ...). Results therefore depend only on the
//! seed and the counter, never on scheduling or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Photon generation for a block of pulses.
pub const DOMAIN_PHOTONS: u64 = 0;
/// Timestamp jitter for synthetic time-tag streams.
pub const DOMAIN_JITTER: u64 = 1 << 62;
/// Bootstrap replicates.
pub const DOMAIN_BOOTSTRAP: u64 = 2 << 62;
/// Random detector trees for the oracle equivalence suite.
pub const DOMAIN_TREES: u64 = 3 << 62;

pub fn stream_rng(seed: u64, domain: u64, counter: u64) -> StreamRng {
    debug_assert!(counter < 1 << 62);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(domain | counter);
    rng
}
