//! Reliability laboratory for erasure-coded distributed storage.
//!
//! The crate models "liquid" storage systems — large MDS codes spread over
//! every node of a cluster, with repair bandwidth regulated lazily — next to
//! conventional small-code reactive systems, and provides three layers:
//!
//! * stochastic failure models and a discrete-event cluster simulator
//!   ([`failure`], [`sim`]) with reactive, fixed-rate liquid, and regulated
//!   liquid repair policies;
//! * analytic reliability bounds ([`bounds`]) and the repair regulator
//!   ([`regulator`]) they share;
//! * the erasure codec and flow storage organization ([`codec`]).
//!
//! All randomness flows through [`rng`]'s seeded substreams, so every result
//! is bit-for-bit reproducible from a scenario seed.

pub mod bounds;
pub mod codec;
pub mod failure;
pub mod regulator;
pub mod rng;
pub mod scenario;
pub mod sim;

/// Seconds per (Julian) year: 365.25 days.
pub const SECONDS_PER_YEAR: f64 = 365.25 * 86_400.0;

/// Hours per (Julian) year.
pub const HOURS_PER_YEAR: f64 = 365.25 * 24.0;

/// Convenience conversion used throughout reporting.
pub fn hours_to_years(hours: f64) -> f64 {
    hours / HOURS_PER_YEAR
}

/// Convenience conversion used throughout reporting.
pub fn seconds_to_years(seconds: f64) -> f64 {
    seconds / SECONDS_PER_YEAR
}
