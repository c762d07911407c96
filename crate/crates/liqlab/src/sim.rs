//! Discrete-event simulator of an erasure-coded storage cluster.
//!
//! The simulator tracks node lifecycles (permanent failures, transient
//! outages, the repair-initiation timer), latent sector corruption, and the
//! repair process under three policies: reactive small-code repair with an
//! active-group budget, fixed-rate lazy repair, and regulated lazy repair
//! driven by the [`crate::regulator`] request function.
//!
//! Objects are not materialized individually. Each placement group's repair
//! queue is represented by its chain of critical epochs (one per node
//! failure, nested by inclusion) plus a continuous repair frontier — exact
//! for equal-size objects in the large-population limit, and `O(events)`
//! instead of `O(objects)`. Repairing a span `dx` of a group's cycle reads
//! exactly `dx` times the group's source bytes, because every object repair
//! reads k fragments regardless of how many are missing.
//!
//! Time is measured in years, capacities in bytes (binary units), rates in
//! bits per second (decimal units). A loss event resets the cluster to a
//! perfect repair state — including the regulator's estimator history — and
//! the run reports `mttdl_years = simulated_years / (loss_events + 1)`.

mod config;
mod engine;
mod stats;

pub use config::{
    apply_scaling, ClusterConfig, CodeParams, ConfigError, FailureModels, RepairPolicy, RunLimits,
};
pub use engine::run_simulation;
pub use stats::{burst_durations_hours, RateStats, TraceEvent, TraceRow};

use serde::{Deserialize, Serialize};

/// Result of one simulation run; field names are the report contract.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub simulated_years: f64,
    pub loss_events: u64,
    /// `simulated_years / (loss_events + 1)`.
    pub mttdl_years: f64,
    /// Time-weighted mean read repair rate, bits/s.
    pub r_avg: f64,
    /// Time-weighted 99% quantile of the read repair rate, bits/s.
    pub r_99: f64,
    /// Time-weighted 99.99% quantile, bits/s.
    pub r_9999: f64,
    /// Largest instantaneous rate observed, bits/s.
    pub r_peak_observed: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub trace: Option<Vec<TraceRow>>,
}

/// A [`SimReport`] plus internal tallies used by tests and diagnostics.
#[derive(Debug, Clone)]
pub struct SimOutcome {
    pub report: SimReport,
    /// Full rate distribution behind the report's summary statistics, kept
    /// so multi-run aggregation can pool time-weighted quantiles exactly.
    pub rate_stats: RateStats,
    /// `f_at_repair[F]` = repair-cycle fraction spent crossing objects that
    /// were missing exactly `F` fragments when read (the empirical
    /// missing-at-repair distribution, in object-population units).
    pub f_at_repair: Vec<f64>,
    /// Total bytes read by repair.
    pub bytes_read: f64,
    /// Total repair-cycle spans completed, summed over placement groups.
    pub repaired_cycles: f64,
    /// Node failures declared (fragments actually lost), including
    /// transient outages that outlived the repair-initiation timer.
    pub declarations: u64,
}
