//! Cluster geometry, repair policy, failure models, and run limits.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::failure::{RateSchedule, ScheduleError, SectorModel, TransientModel};
use crate::regulator::RegulatorParams;
use crate::SECONDS_PER_YEAR;

/// A configuration that violates one of the documented invariants; the
/// message names the invariant.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("code parameters must satisfy n = k + r with 0 < k < n (got n={n}, k={k}, r={r})")]
    BadCode { n: u32, k: u32, r: u32 },
    #[error("placement: {0}")]
    BadPlacement(&'static str),
    #[error("geometry: {0}")]
    BadGeometry(&'static str),
    #[error("rate: {0}")]
    BadRate(&'static str),
    #[error("regulator: {0}")]
    BadRegulator(&'static str),
    #[error("run limits: {0}")]
    BadRun(&'static str),
    #[error("failure schedule: {0}")]
    BadSchedule(#[from] ScheduleError),
    #[error("failure model: {0}")]
    BadFailureModel(&'static str),
}

/// MDS code geometry: `n` fragments per object, any `k` reconstruct,
/// `r = n - k` may be missing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodeParams {
    pub n: u32,
    pub k: u32,
    pub r: u32,
}

impl CodeParams {
    pub fn new(n: u32, k: u32) -> Self {
        Self { n, k, r: n.saturating_sub(k) }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.k == 0 || self.k >= self.n || self.k + self.r != self.n {
            return Err(ConfigError::BadCode { n: self.n, k: self.k, r: self.r });
        }
        Ok(())
    }

    /// Storage overhead fraction `r / n`.
    pub fn beta(&self) -> f64 {
        f64::from(self.r) / f64::from(self.n)
    }
}

/// How lost fragments are re-generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RepairPolicy {
    /// Small-code reactive repair: groups with missing fragments are repaired
    /// eagerly, up to `round(P·n/M)` groups at once sharing `r_peak_bps`.
    Reactive { r_peak_bps: f64 },
    /// Lazy repair cycling through the source data at a fixed read rate.
    FixedLiquid { r_peak_bps: f64 },
    /// Lazy repair whose rate follows the regulator's requested repair time,
    /// clamped to `rate_cap_bps`.
    Regulated {
        f_tar: f64,
        #[serde(rename = "f_T")]
        f_threshold: f64,
        #[serde(default = "default_gamma")]
        gamma: f64,
        #[serde(default = "default_window_coeff")]
        window_coeff: f64,
        rate_cap_bps: f64,
        /// When false the regulator uses the design failure rate instead of
        /// the interarrival estimator (the known-rate variant).
        #[serde(default = "default_true")]
        estimate_rate: bool,
    },
}

fn default_gamma() -> f64 {
    RegulatorParams::DEFAULT_GAMMA
}

fn default_window_coeff() -> f64 {
    RegulatorParams::DEFAULT_WINDOW_COEFF
}

fn default_true() -> bool {
    true
}

impl RepairPolicy {
    /// Regulated policy with the default regulator parameters for `(n, r)`.
    pub fn regulated_defaults(n: u32, r: u32, rate_cap_bps: f64) -> Self {
        let params = RegulatorParams::defaults_for(n, r);
        RepairPolicy::Regulated {
            f_tar: params.f_tar,
            f_threshold: params.f_threshold,
            gamma: params.gamma,
            window_coeff: params.window_coeff,
            rate_cap_bps,
            estimate_rate: true,
        }
    }

    /// The configured ceiling on the global read rate, bits/s.
    pub fn peak_bps(&self) -> f64 {
        match *self {
            RepairPolicy::Reactive { r_peak_bps } | RepairPolicy::FixedLiquid { r_peak_bps } => {
                r_peak_bps
            }
            RepairPolicy::Regulated { rate_cap_bps, .. } => rate_cap_bps,
        }
    }

    /// Lazy policies repair the whole population in one queue.
    pub fn is_liquid(&self) -> bool {
        !matches!(self, RepairPolicy::Reactive { .. })
    }

    pub fn regulator_params(&self) -> Option<RegulatorParams> {
        match *self {
            RepairPolicy::Regulated { f_tar, f_threshold, gamma, window_coeff, .. } => {
                Some(RegulatorParams { f_tar, f_threshold, gamma, window_coeff })
            }
            _ => None,
        }
    }

    fn scale_rate(&mut self, factor: f64) {
        match self {
            RepairPolicy::Reactive { r_peak_bps } | RepairPolicy::FixedLiquid { r_peak_bps } => {
                *r_peak_bps *= factor;
            }
            RepairPolicy::Regulated { rate_cap_bps, .. } => *rate_cap_bps *= factor,
        }
    }
}

/// Static description of the cluster and its repair policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterConfig {
    /// Number of storage nodes `M`.
    pub nodes: u32,
    /// Raw capacity per node, bytes.
    pub node_capacity_bytes: u64,
    pub code: CodeParams,
    /// Placement groups `P`; liquid policies require exactly one group
    /// spanning all nodes.
    pub placement_groups: u32,
    pub object_size_bytes: u64,
    /// Repair-initiation timer: an unresponsive node's fragments count as
    /// lost once it has been down this long.
    pub t_rit_years: f64,
    pub policy: RepairPolicy,
}

impl ClusterConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.code.validate()?;
        if self.nodes < self.code.n {
            return Err(ConfigError::BadPlacement("a group needs n distinct nodes (n > M)"));
        }
        if self.placement_groups == 0 {
            return Err(ConfigError::BadPlacement("placement_groups must be at least 1"));
        }
        if self.policy.is_liquid() && (self.placement_groups != 1 || self.code.n != self.nodes) {
            return Err(ConfigError::BadPlacement(
                "liquid policies require placement_groups = 1 and n = M",
            ));
        }
        if self.node_capacity_bytes == 0 {
            return Err(ConfigError::BadGeometry("node capacity must be positive"));
        }
        if self.object_size_bytes == 0 {
            return Err(ConfigError::BadGeometry("object size must be positive"));
        }
        if self.object_count() < 1.0 {
            return Err(ConfigError::BadGeometry(
                "object size exceeds the source data (object count below 1)",
            ));
        }
        if !(self.t_rit_years >= 0.0 && self.t_rit_years.is_finite()) {
            return Err(ConfigError::BadGeometry("t_rit_years must be finite and non-negative"));
        }
        let peak = self.policy.peak_bps();
        if !(peak > 0.0 && peak.is_finite()) {
            return Err(ConfigError::BadRate("repair rate ceiling must be positive and finite"));
        }
        if let Some(params) = self.policy.regulator_params() {
            params.validate().map_err(ConfigError::BadRegulator)?;
        }
        Ok(())
    }

    /// Source (pre-redundancy) data, bytes: `M·S·k/n`.
    pub fn d_src_bytes(&self) -> f64 {
        self.nodes as f64 * self.node_capacity_bytes as f64 * self.code.k as f64
            / f64::from(self.code.n)
    }

    /// Source bytes stored by one placement group.
    pub fn group_source_bytes(&self) -> f64 {
        self.d_src_bytes() / f64::from(self.placement_groups)
    }

    /// Equivalent number of stored objects.
    pub fn object_count(&self) -> f64 {
        self.d_src_bytes() / self.object_size_bytes as f64
    }

    /// Reactive policy: how many groups may repair at once. Set so that one
    /// failed node's groups saturate the budget: `round(P·n/M)`.
    pub fn active_group_limit(&self) -> u32 {
        let limit = f64::from(self.placement_groups) * f64::from(self.code.n) / self.nodes as f64;
        (limit.round() as u32).clamp(1, self.placement_groups)
    }

    /// Fixed-rate liquid repair: years per full cycle, `8·D_src/(R·seconds)`.
    pub fn fixed_cycle_years(&self) -> Option<f64> {
        match self.policy {
            RepairPolicy::FixedLiquid { r_peak_bps } => {
                Some(8.0 * self.d_src_bytes() / (r_peak_bps * SECONDS_PER_YEAR))
            }
            _ => None,
        }
    }
}

/// The stochastic environment a run draws from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FailureModels {
    /// Per-node permanent-failure rate schedule.
    pub node: RateSchedule,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub transients: Option<TransientModel>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sectors: Option<SectorModel>,
}

impl FailureModels {
    pub fn constant(lambda_per_year: f64) -> Self {
        Self { node: RateSchedule::constant(lambda_per_year), transients: None, sectors: None }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.node.validate()?;
        if let Some(t) = &self.transients {
            if t.occurrence_rate_per_year < 0.0 {
                return Err(ConfigError::BadFailureModel("transient rate must be non-negative"));
            }
            if !(t.duration_median_seconds > 0.0) || !(t.duration_shape > 0.0) {
                return Err(ConfigError::BadFailureModel(
                    "transient duration median and shape must be positive",
                ));
            }
        }
        if let Some(s) = &self.sectors {
            if s.sector_rate_per_year < 0.0 {
                return Err(ConfigError::BadFailureModel("sector rate must be non-negative"));
            }
            if s.sector_size_bytes == 0 {
                return Err(ConfigError::BadFailureModel("sector size must be positive"));
            }
        }
        Ok(())
    }

    /// Long-run mean node failure rate; seeds the regulator's estimator.
    pub fn design_lambda(&self) -> f64 {
        let mean = self.node.mean_rate();
        if mean > 0.0 {
            mean
        } else {
            1.0 // placeholder; never queried when nothing fails
        }
    }
}

/// Stopping rules for one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunLimits {
    pub max_years: f64,
    #[serde(default = "default_max_losses")]
    pub max_losses: u64,
    #[serde(default)]
    pub trace: bool,
}

fn default_max_losses() -> u64 {
    200
}

impl RunLimits {
    pub fn new(max_years: f64) -> Self {
        Self { max_years, max_losses: default_max_losses(), trace: false }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.max_years > 0.0 && self.max_years.is_finite()) {
            return Err(ConfigError::BadRun("max_years must be positive and finite"));
        }
        if self.max_losses == 0 {
            return Err(ConfigError::BadRun("max_losses must be at least 1"));
        }
        Ok(())
    }
}

/// Rescales a setup onto desk-size hardware while preserving its dimensionless
/// shape. `s_factor` shrinks capacities (node capacity and object size);
/// `lambda_factor` speeds up time (failure and corruption rates up, durations
/// and timers down). Repair-rate ceilings co-scale with `s·λ` so every
/// `rate·time/capacity` group — cycle lengths in failure units, `λT`, burst
/// shapes — is invariant; loss statistics scale as `1/λ`.
pub fn apply_scaling(
    cluster: &ClusterConfig,
    failure: &FailureModels,
    s_factor: f64,
    lambda_factor: f64,
) -> (ClusterConfig, FailureModels) {
    assert!(s_factor > 0.0 && s_factor.is_finite(), "s_factor must be positive");
    assert!(lambda_factor > 0.0 && lambda_factor.is_finite(), "lambda_factor must be positive");

    let scale_bytes = |bytes: u64| -> u64 {
        let scaled = bytes as f64 * s_factor;
        assert!(
            scaled >= 1.0 && (scaled - scaled.round()).abs() < 1e-6 * scaled,
            "byte sizes must stay whole under s_factor"
        );
        scaled.round() as u64
    };

    let mut cluster = cluster.clone();
    cluster.node_capacity_bytes = scale_bytes(cluster.node_capacity_bytes);
    cluster.object_size_bytes = scale_bytes(cluster.object_size_bytes);
    cluster.t_rit_years /= lambda_factor;
    cluster.policy.scale_rate(s_factor * lambda_factor);

    let mut failure = failure.clone();
    for seg in &mut failure.node.segments {
        seg.lambda_per_year *= lambda_factor;
        seg.duration_years /= lambda_factor;
    }
    if let Some(t) = &mut failure.transients {
        t.occurrence_rate_per_year *= lambda_factor;
        t.duration_median_seconds /= lambda_factor;
    }
    if let Some(s) = &mut failure.sectors {
        s.sector_rate_per_year *= lambda_factor;
        s.sector_size_bytes = scale_bytes(s.sector_size_bytes);
    }
    (cluster, failure)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::failure::RateSegment;

    const PB: f64 = (1u64 << 50) as f64;

    fn fixed_402() -> ClusterConfig {
        ClusterConfig {
            nodes: 402,
            node_capacity_bytes: 1u64 << 50,
            code: CodeParams::new(402, 268),
            placement_groups: 1,
            object_size_bytes: 1u64 << 44,
            t_rit_years: 30.0 / 60.0 / 24.0 / 365.25,
            policy: RepairPolicy::FixedLiquid { r_peak_bps: 104e9 },
        }
    }

    #[test]
    fn code_params_validate() {
        assert!(CodeParams::new(14, 10).validate().is_ok());
        assert_eq!(CodeParams::new(14, 10).r, 4);
        assert!(CodeParams::new(10, 10).validate().is_err());
        assert!(CodeParams::new(10, 0).validate().is_err());
        assert!(CodeParams { n: 14, k: 10, r: 3 }.validate().is_err());
        assert!((CodeParams::new(402, 268).beta() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn published_fixed_rate_cycle_time() {
        // 268 PB of source read at 104 Gbps takes about 0.7356 years.
        let cfg = fixed_402();
        assert!((cfg.d_src_bytes() - 268.0 * PB).abs() < 1.0);
        let t = cfg.fixed_cycle_years().unwrap();
        assert!((t - 0.7356).abs() < 0.0005, "cycle {t}");
    }

    #[test]
    fn reactive_active_limit_saturates_on_one_node() {
        // P = 100·M/n placement groups: one failed node touches exactly the
        // active budget, so a single failure saturates the peak rate.
        let cfg = ClusterConfig {
            nodes: 3010,
            node_capacity_bytes: 1u64 << 50,
            code: CodeParams::new(14, 10),
            placement_groups: 100 * 3010 / 14,
            object_size_bytes: 1u64 << 30,
            t_rit_years: 0.0,
            policy: RepairPolicy::Reactive { r_peak_bps: 6.4e12 },
        };
        cfg.validate().unwrap();
        assert_eq!(cfg.active_group_limit(), 100);
    }

    #[test]
    fn validation_names_the_violated_invariant() {
        let mut liquid_with_groups = fixed_402();
        liquid_with_groups.placement_groups = 2;
        assert!(matches!(
            liquid_with_groups.validate(),
            Err(ConfigError::BadPlacement(msg)) if msg.contains("liquid")
        ));

        let mut small_cluster = fixed_402();
        small_cluster.nodes = 401;
        assert!(matches!(small_cluster.validate(), Err(ConfigError::BadPlacement(_))));

        let mut no_rate = fixed_402();
        no_rate.policy = RepairPolicy::FixedLiquid { r_peak_bps: 0.0 };
        assert!(matches!(no_rate.validate(), Err(ConfigError::BadRate(_))));

        let mut huge_objects = fixed_402();
        huge_objects.object_size_bytes = u64::MAX;
        assert!(matches!(huge_objects.validate(), Err(ConfigError::BadGeometry(_))));

        let mut bad_reg = fixed_402();
        bad_reg.policy = RepairPolicy::Regulated {
            f_tar: 0.5,
            f_threshold: 0.2, // f_tar must stay below f_threshold
            gamma: default_gamma(),
            window_coeff: default_window_coeff(),
            rate_cap_bps: 1e12,
            estimate_rate: true,
        };
        assert!(matches!(bad_reg.validate(), Err(ConfigError::BadRegulator(_))));
    }

    #[test]
    fn regulated_defaults_match_regulator_defaults() {
        let policy = RepairPolicy::regulated_defaults(402, 134, 1e12);
        let params = policy.regulator_params().unwrap();
        assert_eq!(params, RegulatorParams::defaults_for(402, 134));
        assert_eq!(policy.peak_bps(), 1e12);
    }

    #[test]
    fn policy_json_round_trips_with_renamed_threshold_key() {
        let policy = RepairPolicy::regulated_defaults(402, 134, 1e12);
        let json = serde_json::to_string(&policy).unwrap();
        assert!(json.contains("\"f_T\":"), "{json}");
        assert_eq!(serde_json::from_str::<RepairPolicy>(&json).unwrap(), policy);

        // Optional knobs fall back to defaults; unknown keys are rejected.
        let sparse: RepairPolicy = serde_json::from_str(
            r#"{"kind":"regulated","f_tar":0.2,"f_T":0.3,"rate_cap_bps":1e11}"#,
        )
        .unwrap();
        assert_eq!(sparse.regulator_params().unwrap().gamma, default_gamma());
        assert!(serde_json::from_str::<RepairPolicy>(
            r#"{"kind":"reactive","r_peak_bps":1.0,"bogus":2}"#
        )
        .is_err());
    }

    #[test]
    fn scaling_keeps_dimensionless_shape() {
        let cluster = fixed_402();
        let failure = FailureModels {
            node: RateSchedule {
                segments: vec![
                    RateSegment { duration_years: 3.0, lambda_per_year: 1.0 / 3.0 },
                    RateSegment { duration_years: 1.0, lambda_per_year: 1.0 },
                ],
                cyclic: true,
            },
            transients: Some(TransientModel {
                occurrence_rate_per_year: 4.0,
                duration_median_seconds: 120.0,
                duration_shape: 1.1,
            }),
            sectors: Some(SectorModel { sector_rate_per_year: 0.1, sector_size_bytes: 4096 }),
        };

        let (c1, f1) = apply_scaling(&cluster, &failure, 1.0, 1.0);
        assert_eq!(c1, cluster);
        assert_eq!(f1, failure);

        let (c2, f2) = apply_scaling(&cluster, &failure, 0.5, 10.0);
        assert_eq!(c2.node_capacity_bytes, cluster.node_capacity_bytes / 2);
        assert_eq!(c2.object_size_bytes, cluster.object_size_bytes / 2);
        // Object count (trace shape) is preserved.
        assert_eq!(c2.object_count(), cluster.object_count());
        assert_eq!(c2.t_rit_years, cluster.t_rit_years / 10.0);
        assert_eq!(c2.policy.peak_bps(), 104e9 * 0.5 * 10.0);
        // Cycle length measured in failure time is invariant: T' · λ' = T · λ.
        let lambda = |f: &FailureModels| f.node.segments[0].lambda_per_year;
        let t1 = cluster.fixed_cycle_years().unwrap() * lambda(&failure);
        let t2 = c2.fixed_cycle_years().unwrap() * lambda(&f2);
        assert!((t1 - t2).abs() < 1e-12 * t1);
        // Schedule period shrinks with lambda_factor; mean failures per
        // period are unchanged.
        assert_eq!(f2.node.period(), failure.node.period() / 10.0);
        let per_period = |f: &FailureModels| f.node.mean_rate() * f.node.period();
        assert!((per_period(&f2) - per_period(&failure)).abs() < 1e-12);
        let t = f2.transients.unwrap();
        assert_eq!(t.occurrence_rate_per_year, 40.0);
        assert_eq!(t.duration_median_seconds, 12.0);
        assert_eq!(f2.sectors.unwrap().sector_size_bytes, 2048);
    }

    #[test]
    fn design_lambda_handles_silent_schedules() {
        assert_eq!(FailureModels::constant(0.25).design_lambda(), 0.25);
        assert_eq!(FailureModels::constant(0.0).design_lambda(), 1.0);
    }
}
