//! Deterministic random number generation.
//!
//! Every stochastic component of the crate draws from ChaCha12, a counter-mode
//! stream cipher with a specified, platform-independent output sequence. A run
//! is identified by a single `u64` seed; independent substreams (one per node
//! and per process kind) are derived through the cipher's 64-bit stream
//! parameter, so event generation is insensitive to simulation interleaving.
//!
//! Floating-point conversion is done explicitly here (rather than through
//! distribution adapters) so the exact bit-level mapping from generator output
//! to samples is pinned down in one place.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

/// Process kinds that get their own substream per node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamKind {
    /// Permanent (whole-node) failure arrivals.
    NodeFailure = 1,
    /// Transient outage arrivals and durations.
    Transient = 2,
    /// Latent sector failure arrivals and placement.
    Sector = 3,
    /// Placement-group assignment shuffling.
    Placement = 4,
    /// Miscellaneous single-purpose draws (tests, tooling).
    Aux = 5,
}

/// SplitMix64 step; used only to expand a 64-bit seed into a 256-bit key.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Build the generator for `(seed, kind, index)`.
///
/// `index` is typically a node id; use 0 for global streams.
pub fn stream(seed: u64, kind: StreamKind, index: u64) -> ChaCha12Rng {
    let mut key = [0u8; 32];
    let mut st = seed;
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut st).to_le_bytes());
    }
    let mut rng = ChaCha12Rng::from_seed(key);
    rng.set_stream(((kind as u64) << 56) | index);
    rng
}

/// Uniform in `[0, 1)` with 53 random bits.
pub fn uniform_co(rng: &mut ChaCha12Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform in `(0, 1]`; safe as an argument to `ln`.
pub fn uniform_oc(rng: &mut ChaCha12Rng) -> f64 {
    ((rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform in `(0, 1)`; safe for logit-style transforms.
pub fn uniform_oo(rng: &mut ChaCha12Rng) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Standard exponential (unit mean) via inversion.
pub fn exponential(rng: &mut ChaCha12Rng) -> f64 {
    -uniform_oc(rng).ln()
}

/// Uniform integer in `[0, bound)` by rejection (unbiased).
pub fn uniform_u64(rng: &mut ChaCha12Rng, bound: u64) -> u64 {
    assert!(bound > 0, "uniform_u64 bound must be positive");
    if bound.is_power_of_two() {
        return rng.next_u64() & (bound - 1);
    }
    // Rejection zone keeps the draw exactly uniform.
    let zone = u64::MAX - (u64::MAX % bound);
    loop {
        let v = rng.next_u64();
        if v < zone {
            return v % bound;
        }
    }
}
