//! Seeded, counter-based random streams.
//!
//! Every random draw in the crate comes from a ChaCha8 stream keyed by
//! `(master seed, purpose)` and selected by a stream index (usually the trial
//! number), so trials can run in any order or in parallel and still
//! reproduce bit for bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Domain separation tags for independent uses of one master seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Selection = 1,
    Thinning = 2,
    Meshes = 3,
    LemmaSearch = 4,
    Spectral = 5,
    Tails = 6,
    Subsets = 7,
    Theorem2 = 8,
    Theorem3 = 9,
}

pub fn stream(seed: u64, purpose: Purpose, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(purpose as u64).to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}

/// Derives a child seed, used when a sub-procedure takes its own master seed.
pub fn child_seed(seed: u64, purpose: Purpose, index: u64) -> u64 {
    use rand::RngCore;
    stream(seed, purpose, index).next_u64()
}
