//! Deterministic substream derivation.
//!
//! Every sampling site in the crate draws from a ChaCha8 stream whose seed is
//! derived from the master seed, a domain tag, and up to three coordinates
//! (module index, repetition, output column, ...). Streams for distinct
//! coordinates are statistically independent, and results are bit-identical
//! no matter how work is scheduled across threads.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Domain tags keeping unrelated sampling sites on disjoint streams.
pub mod domains {
    /// Per-qubit outcome streams used by the marginal measurement protocol.
    pub const PROTOCOL_QUBIT: u64 = 1;
    /// Per-(repetition, output) batch streams used by full-network sampling.
    pub const NETWORK_BATCH: u64 = 2;
    /// Joint control-pattern draws when modules are sampled together.
    pub const JOINT_OUTCOME: u64 = 3;
    /// Per-qubit loss masks applied after joint pattern draws.
    pub const JOINT_LOSS: u64 = 4;
    /// Seeded input-partition permutations.
    pub const PARTITION: u64 = 5;
    /// Per-datum streams for sampled dataset evaluation.
    pub const EVAL_DATUM: u64 = 6;
}

/// 64-bit finalizer with full avalanche (the SplitMix64 mixer).
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// Derives the ChaCha8 stream for `(master, domain, a, b, c)`. Equal inputs
/// give equal streams; any differing word gives an unrelated stream.
pub fn substream(master: u64, domain: u64, a: u64, b: u64, c: u64) -> ChaCha8Rng {
    let mut acc = 0x243F_6A88_85A3_08D3u64;
    for w in [master, domain, a, b, c] {
        acc = mix64(acc.wrapping_add(GOLDEN) ^ w);
    }
    let mut seed = [0u8; 32];
    for (i, chunk) in seed.chunks_exact_mut(8).enumerate() {
        let word = mix64(acc.wrapping_add(GOLDEN.wrapping_mul(1 + i as u64)));
        chunk.copy_from_slice(&word.to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}
