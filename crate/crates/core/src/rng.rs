//! Deterministic randomness.
//!
//! Every stochastic operation draws from a ChaCha12 stream derived from a
//! 64-bit experiment seed plus a path of labels, e.g. `(run, iteration,
//! direction)`. Identical seed and path always produce the identical stream,
//! independent of platform.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Derives an independent generator from `seed` and a label path.
///
/// The labels are folded into the key one by one, so distinct paths yield
/// unrelated streams while the same path is bit-reproducible.
pub fn derive_rng(seed: u64, path: &[u64]) -> ChaCha12Rng {
    let mut state = seed ^ 0x6a09e667f3bcc908;
    let _ = splitmix64(&mut state);
    for &label in path {
        state ^= label.wrapping_mul(0x2545f4914f6cdd1d);
        let _ = splitmix64(&mut state);
    }
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha12Rng::from_seed(key)
}
