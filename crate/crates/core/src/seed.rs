//! Seed derivation for reproducible Monte Carlo runs.
//!
//! Every random draw in the toolkit comes from a ChaCha stream keyed on
//! `(master seed, replicate index, stream label)`. Results therefore depend
//! only on the master seed, never on how replicates are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Stream label for Gaussian field draws.
pub const FIELD_STREAM: &str = "field";
/// Stream label for random drift fields, kept apart from the field draws.
pub const DRIFT_STREAM: &str = "drift";
/// Stream label for the spectral white-noise process.
pub const NOISE_STREAM: &str = "noise";

const DOMAIN_TAG: &[u8] = b"polarfield/derive_seed/v1";

/// Mixes a master seed, a replicate index and a stream label into a 64-bit seed.
///
/// The mixing function is SHA-256 over a length-prefixed encoding, truncated to
/// the first eight bytes (little endian).
pub fn derive_seed(master: u64, replicate: u64, stream: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(DOMAIN_TAG);
    h.update(master.to_le_bytes());
    h.update(replicate.to_le_bytes());
    h.update((stream.len() as u64).to_le_bytes());
    h.update(stream.as_bytes());
    let digest = h.finalize();
    let mut out = [0u8; 8];
    out.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(out)
}

/// RNG for one replicate of one stream.
pub fn replicate_rng(master: u64, replicate: u64, stream: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, replicate, stream))
}

/// Hex SHA-256 of a byte string; used for grid hashes and file digests.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
