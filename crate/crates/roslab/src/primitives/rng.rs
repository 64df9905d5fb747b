//! Deterministic substream derivation.
//!
//! Every logical i.i.d. sequence draws from its own ChaCha stream whose seed is a
//! SplitMix64 mix of the master seed and a fixed label tuple. Adding a stream never
//! perturbs the others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Labels of the logical sequences. Discriminants are part of the seeding scheme
/// and must never be renumbered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StreamKind {
    Interarrival = 1,
    FirstArrival = 2,
    Service = 3,
    InitialService = 4,
    Patience = 5,
    InitialPatience = 6,
    Choosing = 7,
    Renewal = 8,
    Sde = 9,
    Replication = 10,
    SdeInitial = 11,
}

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, labels: &[u64]) -> u64 {
    labels
        .iter()
        .fold(splitmix64(master), |acc, &l| splitmix64(acc ^ splitmix64(l)))
}

pub fn substream(master: u64, kind: StreamKind, a: u64, b: u64) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(master, &[kind as u64, a, b]))
}

/// Seed of replication `rep` of the `m`-th system.
pub fn replication_seed(master: u64, m: u64, rep: u64) -> u64 {
    derive_seed(master, &[StreamKind::Replication as u64, m, rep])
}
