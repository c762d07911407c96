//! Failure-process samplers.
//!
//! Three independent processes feed the cluster simulator:
//!
//! * permanent node failures — per-node exponential lifetimes under a
//!   piecewise-constant (optionally cyclic) rate schedule,
//! * transient outages — Poisson arrivals with log-logistic durations,
//! * latent sector failures — an aggregate per-node Poisson process standing
//!   in for one timer per 4 KB sector.
//!
//! All samplers are pure functions over an explicitly passed generator; the
//! time unit is years throughout (1 year = 365.25 days = 31,557,600 s).

use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;
use crate::SECONDS_PER_YEAR;

/// One constant-rate stretch of a failure-rate schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateSegment {
    /// Segment length in years.
    pub duration_years: f64,
    /// Per-node failure rate over the segment, in 1/years.
    pub lambda_per_year: f64,
}

/// Piecewise-constant per-node failure rate, optionally repeating forever.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateSchedule {
    pub segments: Vec<RateSegment>,
    /// When true the segment pattern repeats with period = total duration.
    pub cyclic: bool,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ScheduleError {
    #[error("rate schedule must contain at least one segment")]
    Empty,
    #[error("segment {0} has non-positive duration")]
    BadDuration(usize),
    #[error("segment {0} has negative rate")]
    NegativeRate(usize),
}

impl RateSchedule {
    /// Constant-rate schedule (the common case).
    pub fn constant(lambda_per_year: f64) -> Self {
        RateSchedule {
            segments: vec![RateSegment {
                duration_years: 1.0,
                lambda_per_year,
            }],
            cyclic: true,
        }
    }

    pub fn validate(&self) -> Result<(), ScheduleError> {
        if self.segments.is_empty() {
            return Err(ScheduleError::Empty);
        }
        for (i, s) in self.segments.iter().enumerate() {
            if !(s.duration_years > 0.0) {
                return Err(ScheduleError::BadDuration(i));
            }
            if s.lambda_per_year < 0.0 {
                return Err(ScheduleError::NegativeRate(i));
            }
        }
        Ok(())
    }

    /// Total length of one pass over the segments.
    pub fn period(&self) -> f64 {
        self.segments.iter().map(|s| s.duration_years).sum()
    }

    /// Rate in effect at absolute time `t` (years). For non-cyclic schedules
    /// the final segment's rate extends past the end of the pattern.
    pub fn rate_at(&self, t: f64) -> f64 {
        let period = self.period();
        let mut pos = if self.cyclic { t.rem_euclid(period) } else { t };
        if !self.cyclic && pos >= period {
            return self.segments.last().map_or(0.0, |s| s.lambda_per_year);
        }
        for s in &self.segments {
            if pos < s.duration_years {
                return s.lambda_per_year;
            }
            pos -= s.duration_years;
        }
        // Floating-point boundary: fall back to the last segment.
        self.segments.last().map_or(0.0, |s| s.lambda_per_year)
    }

    /// Mean rate over one period.
    pub fn mean_rate(&self) -> f64 {
        let p = self.period();
        if p == 0.0 {
            return 0.0;
        }
        self.segments
            .iter()
            .map(|s| s.duration_years * s.lambda_per_year)
            .sum::<f64>()
            / p
    }
}

/// Transient-outage model: Poisson starts, log-logistic durations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransientModel {
    /// Per-node occurrence rate, 1/years (λ_TF).
    pub occurrence_rate_per_year: f64,
    /// Median outage duration in seconds.
    pub duration_median_seconds: f64,
    /// Log-logistic shape parameter (dimensionless).
    pub duration_shape: f64,
}

/// Latent sector-failure model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectorModel {
    /// Per-sector failure rate, 1/years (λ_SF).
    pub sector_rate_per_year: f64,
    /// Sector size in bytes.
    #[serde(default = "default_sector_size")]
    pub sector_size_bytes: u64,
}

fn default_sector_size() -> u64 {
    4096
}

/// Kind discriminator for generated failure events.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureKind {
    Permanent,
    TransientStart,
    TransientEnd,
    /// Sector index within the node.
    Sector(u64),
}

/// A single generated failure event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FailureEvent {
    pub time_years: f64,
    pub node: u32,
    pub kind: FailureKind,
}

/// First failure time strictly after `now` for one node under `schedule`.
///
/// Draws a unit exponential and inverts the integrated rate across segments,
/// carrying unconsumed exponential mass from segment to segment (exact, no
/// thinning). Returns `None` when the remaining schedule carries zero total
/// rate (e.g. an all-zero or exhausted non-cyclic schedule).
pub fn sample_next_node_failure(
    schedule: &RateSchedule,
    now: f64,
    rng: &mut ChaCha12Rng,
) -> Option<f64> {
    debug_assert!(now >= 0.0);
    let period = schedule.period();
    if period <= 0.0 {
        return None;
    }
    let mut need = rng::exponential(rng);
    let cycle_mass: f64 = schedule
        .segments
        .iter()
        .map(|s| s.duration_years * s.lambda_per_year)
        .sum();

    // Locate the segment containing `now`.
    let (mut cycle_base, mut offset) = if schedule.cyclic {
        let k = (now / period).floor();
        (k * period, now - k * period)
    } else {
        (0.0, now)
    };
    if !schedule.cyclic && offset >= period {
        return None; // schedule exhausted
    }

    loop {
        let mut seg_start = cycle_base;
        for s in &schedule.segments {
            let seg_end = seg_start + s.duration_years;
            if seg_end > cycle_base + offset {
                let from = (cycle_base + offset).max(seg_start);
                let span = seg_end - from;
                let mass = span * s.lambda_per_year;
                if need <= mass {
                    return Some(from + need / s.lambda_per_year);
                }
                need -= mass;
            }
            seg_start = seg_end;
        }
        if !schedule.cyclic {
            return None;
        }
        if cycle_mass <= 0.0 {
            return None; // all-zero cyclic schedule: no event, ever
        }
        cycle_base += period;
        offset = 0.0;
        // Fast-forward over whole cycles when the draw is much larger than
        // one period's worth of rate.
        if need > cycle_mass {
            let skip = (need / cycle_mass).floor();
            need -= skip * cycle_mass;
            cycle_base += skip * period;
        }
    }
}

/// Log-logistic sample: `median * (u/(1-u))^(1/shape)` with `u ~ U(0,1)`.
pub fn sample_loglogistic(median_seconds: f64, shape: f64, rng: &mut ChaCha12Rng) -> f64 {
    assert!(median_seconds > 0.0 && shape > 0.0);
    let u = rng::uniform_oo(rng);
    median_seconds * (u / (1.0 - u)).powf(1.0 / shape)
}

/// Log-logistic complementary CDF, P(duration > t).
pub fn loglogistic_survival(median_seconds: f64, shape: f64, t_seconds: f64) -> f64 {
    if t_seconds <= 0.0 {
        return 1.0;
    }
    1.0 / (1.0 + (t_seconds / median_seconds).powf(shape))
}

/// All transient outages starting before `horizon` for one node.
///
/// Returns `(start, end)` pairs in years; an end may fall past the horizon or
/// overlap a later permanent failure — the caller resolves such conflicts.
pub fn sample_transient_events(
    model: &TransientModel,
    horizon: f64,
    rng: &mut ChaCha12Rng,
) -> Vec<(f64, f64)> {
    assert!(horizon > 0.0);
    let mut events = Vec::new();
    if model.occurrence_rate_per_year <= 0.0 {
        return events;
    }
    let mut t = 0.0;
    loop {
        t += rng::exponential(rng) / model.occurrence_rate_per_year;
        if t >= horizon {
            return events;
        }
        let dur_s = sample_loglogistic(model.duration_median_seconds, model.duration_shape, rng);
        events.push((t, t + dur_s / SECONDS_PER_YEAR));
    }
}

/// Next transient outage after `now` for one node: `(start, end)` in years.
///
/// Lazy single-event form of [`sample_transient_events`]; the caller chains
/// calls using the previous event's end time to avoid overlapping outages.
pub fn sample_next_transient(
    model: &TransientModel,
    now: f64,
    rng: &mut ChaCha12Rng,
) -> Option<(f64, f64)> {
    if model.occurrence_rate_per_year <= 0.0 {
        return None;
    }
    let start = now + rng::exponential(rng) / model.occurrence_rate_per_year;
    let dur_s = sample_loglogistic(model.duration_median_seconds, model.duration_shape, rng);
    Some((start, start + dur_s / SECONDS_PER_YEAR))
}

/// Latent sector failures on one node over `[0, horizon)`.
///
/// The node's sectors are aggregated into a single Poisson process with rate
/// `(node_capacity/sector_size) * sector_rate`; each event lands on a
/// uniformly random sector.
pub fn sample_sector_failures(
    model: &SectorModel,
    node_capacity_bytes: u64,
    node: u32,
    horizon: f64,
    rng: &mut ChaCha12Rng,
) -> Vec<FailureEvent> {
    assert!(
        node_capacity_bytes % model.sector_size_bytes == 0,
        "node capacity must be a whole number of sectors"
    );
    let sectors = node_capacity_bytes / model.sector_size_bytes;
    let rate = sectors as f64 * model.sector_rate_per_year;
    let mut events = Vec::new();
    if rate <= 0.0 {
        return events;
    }
    let mut t = 0.0;
    loop {
        t += rng::exponential(rng) / rate;
        if t >= horizon {
            return events;
        }
        events.push(FailureEvent {
            time_years: t,
            node,
            kind: FailureKind::Sector(rng::uniform_u64(rng, sectors)),
        });
    }
}

/// Aggregate per-node sector-failure rate in 1/years.
pub fn sector_rate_per_node(model: &SectorModel, node_capacity_bytes: u64) -> f64 {
    (node_capacity_bytes / model.sector_size_bytes) as f64 * model.sector_rate_per_year
}
