//! Scenario files: the JSON surface of the simulator.
//!
//! A scenario bundles one cluster, one failure environment, and a list of
//! seeds. Each seed becomes an independent run; the summary pools them with
//! the same estimator a single long run would use,
//! `MTTDL = total years / (total losses + number of runs)`, so sharding a
//! horizon across seeds leaves the headline number unbiased.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::{
    run_simulation, ClusterConfig, ConfigError, FailureModels, RateStats, RunLimits, SimOutcome,
    SimReport, TraceRow,
};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("scenario {0}")]
    Invalid(&'static str),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// Run horizon and seed list of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub max_years: f64,
    #[serde(default = "default_max_losses")]
    pub max_losses: u64,
    #[serde(default)]
    pub trace: bool,
    pub seeds: Vec<u64>,
}

fn default_max_losses() -> u64 {
    200
}

impl RunSection {
    pub fn limits(&self) -> RunLimits {
        let mut limits = RunLimits::new(self.max_years);
        limits.max_losses = self.max_losses;
        limits.trace = self.trace;
        limits
    }
}

/// One self-contained experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    /// Output-file stem; restricted to `[A-Za-z0-9._-]`.
    pub name: String,
    pub cluster: ClusterConfig,
    pub failure: FailureModels,
    pub run: RunSection,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let scenario: Scenario = serde_json::from_str(text)?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("scenario serializes");
        text.push('\n');
        text
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.name.is_empty() {
            return Err(ScenarioError::Invalid("name must not be empty"));
        }
        if !self
            .name
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || b == b'.' || b == b'_' || b == b'-')
        {
            return Err(ScenarioError::Invalid(
                "name may only contain letters, digits, '.', '_' and '-'",
            ));
        }
        if self.run.seeds.is_empty() {
            return Err(ScenarioError::Invalid("run.seeds must list at least one seed"));
        }
        self.cluster.validate()?;
        self.failure.validate()?;
        self.run.limits().validate()?;
        Ok(())
    }
}

/// Runs every seed of the scenario, up to `jobs` at a time, and returns the
/// outcomes in seed order regardless of scheduling.
pub fn run_scenario(scenario: &Scenario, jobs: usize) -> Result<Vec<SimOutcome>, ScenarioError> {
    scenario.validate()?;
    let limits = scenario.run.limits();
    let seeds = &scenario.run.seeds;
    let jobs = jobs.max(1).min(seeds.len());

    let run_one = |seed: u64| -> Result<SimOutcome, ScenarioError> {
        Ok(run_simulation(&scenario.cluster, &scenario.failure, &limits, seed)?)
    };

    if jobs == 1 {
        return seeds.iter().map(|&s| run_one(s)).collect();
    }

    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<SimOutcome, ScenarioError>>>> =
        Mutex::new((0..seeds.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&seed) = seeds.get(i) else { break };
                let outcome = run_one(seed);
                slots.lock().expect("no panics hold the lock")[i] = Some(outcome);
            });
        }
    });
    slots
        .into_inner()
        .expect("workers finished")
        .into_iter()
        .map(|slot| slot.expect("every index was claimed"))
        .collect()
}

/// Per-seed entry repeated inside [`ScenarioSummary`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedReport {
    pub seed: u64,
    pub simulated_years: f64,
    pub loss_events: u64,
    pub mttdl_years: f64,
    pub r_avg: f64,
    pub r_99: f64,
    pub r_9999: f64,
    pub r_peak_observed: f64,
}

/// Aggregate over all seeds of one scenario. Rate statistics pool the full
/// per-run distributions, so the quantiles are those of the concatenated
/// runs, not averages of per-run quantiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSummary {
    pub name: String,
    pub runs: u64,
    pub total_simulated_years: f64,
    pub total_loss_events: u64,
    /// `total years / (losses + runs)` — each run contributes its censored
    /// tail as one implicit loss.
    pub mttdl_years: f64,
    pub r_avg: f64,
    pub r_99: f64,
    pub r_9999: f64,
    pub r_peak_observed: f64,
    pub per_seed: Vec<SeedReport>,
}

pub fn summarize(scenario: &Scenario, outcomes: &[SimOutcome]) -> ScenarioSummary {
    assert_eq!(outcomes.len(), scenario.run.seeds.len(), "one outcome per seed");
    let mut pooled = RateStats::new();
    let mut total_years = 0.0;
    let mut total_losses = 0;
    let mut per_seed = Vec::with_capacity(outcomes.len());
    for (&seed, outcome) in scenario.run.seeds.iter().zip(outcomes) {
        let r = &outcome.report;
        total_years += r.simulated_years;
        total_losses += r.loss_events;
        pooled.merge(&outcome.rate_stats);
        per_seed.push(SeedReport {
            seed,
            simulated_years: r.simulated_years,
            loss_events: r.loss_events,
            mttdl_years: r.mttdl_years,
            r_avg: r.r_avg,
            r_99: r.r_99,
            r_9999: r.r_9999,
            r_peak_observed: r.r_peak_observed,
        });
    }
    let (r_avg, r_99, r_9999, r_peak_observed) = pooled.summary().unwrap_or((0.0, 0.0, 0.0, 0.0));
    ScenarioSummary {
        name: scenario.name.clone(),
        runs: outcomes.len() as u64,
        total_simulated_years: total_years,
        total_loss_events: total_losses,
        mttdl_years: total_years / (total_losses + outcomes.len() as u64) as f64,
        r_avg,
        r_99,
        r_9999,
        r_peak_observed,
        per_seed,
    }
}

pub fn report_to_json(report: &SimReport) -> String {
    // The trace leaves as CSV, not JSON; strip it rather than duplicate it.
    let slim = SimReport { trace: None, ..report.clone() };
    let mut text = serde_json::to_string_pretty(&slim).expect("report serializes");
    text.push('\n');
    text
}

pub fn summary_to_json(summary: &ScenarioSummary) -> String {
    let mut text = serde_json::to_string_pretty(summary).expect("summary serializes");
    text.push('\n');
    text
}

/// Renders a trace as CSV: `time_years,read_rate_bps,event`.
pub fn trace_to_csv(rows: &[TraceRow]) -> String {
    let mut out = String::with_capacity(32 * rows.len() + 32);
    out.push_str("time_years,read_rate_bps,event\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{}\n",
            row.time_years,
            row.read_rate_bps,
            row.event.as_str()
        ));
    }
    out
}
