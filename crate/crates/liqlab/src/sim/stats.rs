//! Time-weighted read-rate statistics and the run trace.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::HOURS_PER_YEAR;

/// Neumaier compensated sum; keeps long accumulations exact to the ulp.
#[derive(Debug, Clone, Copy, Default)]
struct Acc {
    sum: f64,
    comp: f64,
}

impl Acc {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Distinct non-zero rates kept exactly before spilling to a histogram.
const EXACT_LIMIT: usize = 4096;
/// Histogram resolution after spilling: bin width 10^(1/2000) ≈ 0.115%.
const BINS_PER_DECADE: f64 = 2000.0;

#[derive(Debug, Clone)]
enum Weights {
    /// Keyed by the rate's IEEE-754 bits; positive floats order like values.
    Exact(BTreeMap<u64, f64>),
    /// Log-spaced bins keyed by `floor(2000·log10(rate))`.
    Binned(BTreeMap<i64, f64>),
}

/// Time-weighted distribution of a piecewise-constant, non-negative rate.
///
/// Small runs are summarized exactly; once the number of distinct rates
/// exceeds [`EXACT_LIMIT`] the weights spill into a logarithmic histogram
/// whose quantiles stay within one bin width (≈0.12%) of exact.
#[derive(Debug, Clone)]
pub struct RateStats {
    weights: Weights,
    zero_years: f64,
    total: Acc,
    integral: Acc,
    peak: f64,
}

impl Default for RateStats {
    fn default() -> Self {
        Self::new()
    }
}

impl RateStats {
    pub fn new() -> Self {
        RateStats {
            weights: Weights::Exact(BTreeMap::new()),
            zero_years: 0.0,
            total: Acc::default(),
            integral: Acc::default(),
            peak: 0.0,
        }
    }

    /// Accounts `dt_years` spent at `rate_bps`.
    pub fn add(&mut self, rate_bps: f64, dt_years: f64) {
        debug_assert!(rate_bps >= 0.0 && rate_bps.is_finite(), "rate {rate_bps}");
        debug_assert!(dt_years >= 0.0 && dt_years.is_finite(), "dt {dt_years}");
        if dt_years <= 0.0 {
            return;
        }
        self.total.add(dt_years);
        self.integral.add(rate_bps * dt_years);
        self.peak = self.peak.max(rate_bps);
        if rate_bps == 0.0 {
            self.zero_years += dt_years;
            return;
        }
        match &mut self.weights {
            Weights::Exact(map) => {
                *map.entry(rate_bps.to_bits()).or_insert(0.0) += dt_years;
                if map.len() > EXACT_LIMIT {
                    let mut bins = BTreeMap::new();
                    for (&bits, &w) in map.iter() {
                        *bins.entry(Self::bin(f64::from_bits(bits))).or_insert(0.0) += w;
                    }
                    self.weights = Weights::Binned(bins);
                }
            }
            Weights::Binned(bins) => {
                *bins.entry(Self::bin(rate_bps)).or_insert(0.0) += dt_years;
            }
        }
    }

    pub fn from_spans<I: IntoIterator<Item = (f64, f64)>>(spans: I) -> Self {
        let mut stats = RateStats::new();
        for (rate, dt) in spans {
            stats.add(rate, dt);
        }
        stats
    }

    /// Folds another run's distribution into this one. Exact while both
    /// sides are exact; binned entries re-enter at their representative
    /// rates, so pooled quantiles keep the one-bin resolution.
    pub fn merge(&mut self, other: &RateStats) {
        self.add(0.0, other.zero_years);
        match &other.weights {
            Weights::Exact(map) => {
                for (&bits, &w) in map.iter() {
                    self.add(f64::from_bits(bits), w);
                }
            }
            Weights::Binned(bins) => {
                for (&bin, &w) in bins.iter() {
                    self.add(Self::bin_value(bin).min(other.peak), w);
                }
            }
        }
        self.peak = self.peak.max(other.peak);
    }

    fn bin(rate: f64) -> i64 {
        (BINS_PER_DECADE * rate.log10()).floor() as i64
    }

    fn bin_value(bin: i64) -> f64 {
        10f64.powf((bin as f64 + 0.5) / BINS_PER_DECADE)
    }

    pub fn total_years(&self) -> f64 {
        self.total.value()
    }

    /// Time-weighted mean rate.
    pub fn mean(&self) -> Option<f64> {
        let total = self.total.value();
        (total > 0.0).then(|| self.integral.value() / total)
    }

    /// Smallest rate `v` with `time(rate ≤ v) ≥ p·total` (time-weighted
    /// quantile). `None` until any time has been recorded.
    pub fn quantile(&self, p: f64) -> Option<f64> {
        assert!((0.0..=1.0).contains(&p), "quantile order {p}");
        let total = self.total.value();
        if total <= 0.0 {
            return None;
        }
        let target = p * total;
        let mut acc = self.zero_years;
        if acc >= target {
            return Some(0.0);
        }
        match &self.weights {
            Weights::Exact(map) => {
                for (&bits, &w) in map.iter() {
                    acc += w;
                    if acc >= target {
                        return Some(f64::from_bits(bits));
                    }
                }
            }
            Weights::Binned(bins) => {
                for (&bin, &w) in bins.iter() {
                    acc += w;
                    if acc >= target {
                        return Some(Self::bin_value(bin).min(self.peak));
                    }
                }
            }
        }
        Some(self.peak) // float residue: target marginally above the last step
    }

    pub fn peak(&self) -> f64 {
        self.peak
    }

    /// `(r_avg, r_99, r_9999, r_peak)` — the report summary.
    pub fn summary(&self) -> Option<(f64, f64, f64, f64)> {
        Some((self.mean()?, self.quantile(0.99)?, self.quantile(0.9999)?, self.peak))
    }
}

/// What happened at a traced instant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceEvent {
    NodeFail,
    TransientStart,
    TransientEnd,
    SectorFail,
    Repair,
    Loss,
    RateChange,
}

impl TraceEvent {
    pub fn as_str(&self) -> &'static str {
        match self {
            TraceEvent::NodeFail => "node_fail",
            TraceEvent::TransientStart => "transient_start",
            TraceEvent::TransientEnd => "transient_end",
            TraceEvent::SectorFail => "sector_fail",
            TraceEvent::Repair => "repair",
            TraceEvent::Loss => "loss",
            TraceEvent::RateChange => "rate_change",
        }
    }
}

/// One trace record: the global read repair rate as of `time_years`, and the
/// event that prompted the record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub time_years: f64,
    pub read_rate_bps: f64,
    pub event: TraceEvent,
}

/// Lengths (hours) of the maximal intervals with a strictly positive rate.
/// The rate between rows is the latest row's rate; a burst still open at the
/// end of the trace is dropped.
pub fn burst_durations_hours(trace: &[TraceRow]) -> Vec<f64> {
    let mut bursts = Vec::new();
    let mut busy_since: Option<f64> = None;
    for row in trace {
        match busy_since {
            None if row.read_rate_bps > 0.0 => busy_since = Some(row.time_years),
            Some(start) if row.read_rate_bps == 0.0 => {
                bursts.push((row.time_years - start) * HOURS_PER_YEAR);
                busy_since = None;
            }
            _ => {}
        }
    }
    bursts
}
