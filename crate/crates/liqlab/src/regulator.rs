//! Read-repair-rate regulator for the liquid policy.
//!
//! Every object in the repair queue, knowing its queue position `x` and its
//! fraction `f` of erased fragments, requests a system repair time of
//! `λ̂⁻¹·φ(f, x)` — the request function φ expresses the desired value of
//! λ·T, the expected number of failures per node over one full repair pass.
//! The system grants the most urgent (smallest) request. On the nominal
//! trajectory `f(x) = 1 − (1−f_tar)^x` the request equals
//! `φ_nom = −ln(1 − f_tar)`, so a healthy queue repairs at the design rate;
//! objects that have drifted above the nominal erased fraction request
//! proportionally faster repair.
//!
//! φ is derived from a level-curve principle: an object at `(f, x)` requests
//! the rate under which its probability of crossing the hard threshold `f_T`
//! matches that of an object at position `x` on the nominal trajectory.
//! Under a Gaussian approximation of the transition law this becomes
//!
//! ```text
//! 1 − e^{−(1−x)·φ}        ⎛ f̄_e − f̄_T ⎞²   f̄_tar
//! ─────────────────────  =  ⎜───────────⎟  · ─────,   f̄_e = f̄·e^{−φ·(1−x)},
//! 1 − e^{−(1−x)·φ_nom}     ⎝ f̄_tar − f̄_T⎠     f̄_e
//! ```
//!
//! where `f̄ = 1 − f` etc. Substituting `u = f̄_e` turns the equation into a
//! quadratic in `u` whose admissible root determines φ exactly.
//!
//! The remaining pieces feed the simulator: a sliding-window estimator for
//! the node failure rate (window shrinking with `f`, so endangered objects
//! weigh recent history), and the chain of *critical epochs* — the objects
//! that sat at the queue tail when a node failure occurred. The granted rate
//! is always determined by one of these.

use std::collections::{BTreeSet, VecDeque};

/// Tuning parameters of the regulator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegulatorParams {
    /// Target fraction of fragments repaired per object at repair time.
    pub f_tar: f64,
    /// Hard threshold fraction the regulator steers away from (typically the
    /// code's erasure-correction limit r/n).
    pub f_threshold: f64,
    /// Floor factor: φ saturates below at `gamma·phi_nom`, capping the
    /// requested rate at `1/gamma` times nominal.
    pub gamma: f64,
    /// Estimator window coefficient c: an object missing F fragments
    /// averages the last `round(c·r) − F` failure inter-arrivals.
    pub window_coeff: f64,
}

impl RegulatorParams {
    pub const DEFAULT_GAMMA: f64 = 1.0 / 3.0;
    pub const DEFAULT_WINDOW_COEFF: f64 = 7.0 / 6.0;

    /// Conventional defaults for an (n, k, r) code: `f_tar = (2/3)·r/n`,
    /// `f_threshold = r/n`, `gamma = 1/3`, `window_coeff = 7/6`.
    pub fn defaults_for(n: u32, r: u32) -> Self {
        let rn = r as f64 / n as f64;
        RegulatorParams {
            f_tar: 2.0 / 3.0 * rn,
            f_threshold: rn,
            gamma: Self::DEFAULT_GAMMA,
            window_coeff: Self::DEFAULT_WINDOW_COEFF,
        }
    }

    /// Nominal request `φ_nom = −ln(1 − f_tar)`.
    pub fn phi_nom(&self) -> f64 {
        -(1.0 - self.f_tar).ln()
    }

    /// Saturation floor `gamma·phi_nom` (the maximal-urgency request).
    pub fn phi_floor(&self) -> f64 {
        self.gamma * self.phi_nom()
    }

    /// Checks the admissible ranges: `0 < f_tar < f_threshold ≤ 1`,
    /// `0 < gamma ≤ 1`, `window_coeff > 0`.
    pub fn validate(&self) -> Result<(), &'static str> {
        if !(self.f_tar > 0.0 && self.f_tar < self.f_threshold && self.f_threshold <= 1.0) {
            return Err("need 0 < f_tar < f_threshold <= 1");
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err("need 0 < gamma <= 1");
        }
        if !(self.window_coeff > 0.0) {
            return Err("need window_coeff > 0");
        }
        Ok(())
    }
}

/// Nominal erased fraction `1 − e^{−λ·T·x}` of an object at queue position
/// `x` when the system repairs every object once per `T` years.
pub fn nominal_fraction(x: f64, lambda: f64, t_years: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&x) && lambda * t_years >= 0.0);
    -(-lambda * t_years * x).exp_m1()
}

/// Unclamped solution of the level-curve equation.
///
/// Returns `None` when the object already stands at or beyond the hard
/// threshold (`f ≥ f_threshold`) or no admissible root exists — both mean
/// maximal urgency, which [`phi`] maps to the floor.
pub fn phi_unclamped(f: f64, x: f64, params: &RegulatorParams) -> Option<f64> {
    assert!(
        (0.0..=1.0).contains(&f) && (0.0..1.0).contains(&x),
        "need f in [0,1] and x in [0,1)"
    );
    if f >= params.f_threshold {
        return None;
    }
    let f_bar = 1.0 - f;
    let tar = 1.0 - params.f_tar;
    let thr = 1.0 - params.f_threshold;
    // With u = f̄·e^{−φ(1−x)} the level-curve equation reads
    //   (1 − u/f̄) / (1 − tar^{1−x}) = (tar/u)·((u − thr)/(tar − thr))²,
    // i.e. a·u² + b·u + c = 0 with the coefficients below.
    let g = (1.0 - tar.powf(1.0 - x)) * tar / ((tar - thr) * (tar - thr));
    let a = g + 1.0 / f_bar;
    let b = -(2.0 * g * thr + 1.0);
    let c = g * thr * thr;
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return None;
    }
    // The polynomial is negative at u = thr and non-negative at u = f̄, so
    // the larger root is the one in (thr, f̄]; b < 0 makes (−b + √disc)/2
    // the cancellation-free numerator for it.
    let u = (-b + disc.sqrt()) / (2.0 * a);
    if !(u > thr && u <= f_bar * (1.0 + 1e-12)) {
        return None;
    }
    Some((f_bar / u).ln().max(0.0) / (1.0 - x))
}

/// Regulator request function φ(f, x), clamped to
/// `[gamma·phi_nom, phi_nom]`.
///
/// Objects at or beyond the hard threshold request the floor (the ceiling
/// is harmless: a healthy queue would run at `phi_nom` anyway, and the
/// clamp keeps an emptier-than-nominal queue from idling the repairer).
pub fn phi(f: f64, x: f64, params: &RegulatorParams) -> f64 {
    match phi_unclamped(f, x, params) {
        Some(v) => v.clamp(params.phi_floor(), params.phi_nom()),
        None => params.phi_floor(),
    }
}

/// Sliding-window estimator of the per-node failure rate.
///
/// Records inter-arrival times of the aggregate n-node failure process and
/// estimates `λ̂ = 1/(n·mean of the last w gaps)` with a window
/// `w = max(1, round(c·r) − F)` that shrinks as the inquiring object's
/// erased count F grows. The buffer is pre-filled with the design-rate gap
/// `1/(n·λ_design)` so early estimates are sane.
#[derive(Debug, Clone)]
pub struct FailureRateEstimator {
    gaps: VecDeque<f64>,
    /// `suffix[w]` = sum of the `w` most recent gaps; rebuilt on every push so
    /// `estimate` is O(1) — the simulator queries once per epoch per failure.
    suffix: Vec<f64>,
    max_window: usize,
    n: u32,
}

impl FailureRateEstimator {
    pub fn new(n: u32, r: u32, window_coeff: f64, lambda_design: f64) -> Self {
        assert!(n >= 1 && lambda_design > 0.0 && window_coeff > 0.0);
        let max_window = ((window_coeff * r as f64).round() as usize).max(1);
        let gaps: VecDeque<f64> = std::iter::repeat(1.0 / (n as f64 * lambda_design))
            .take(max_window)
            .collect();
        let mut estimator = FailureRateEstimator {
            gaps,
            suffix: Vec::new(),
            max_window,
            n,
        };
        estimator.rebuild_suffix();
        estimator
    }

    /// Pushes one aggregate inter-arrival time (years), dropping the oldest
    /// entry beyond the maximal window.
    pub fn record_interarrival(&mut self, gap_years: f64) {
        assert!(gap_years >= 0.0, "inter-arrival times are non-negative");
        if self.gaps.len() == self.max_window {
            self.gaps.pop_front();
        }
        self.gaps.push_back(gap_years);
        self.rebuild_suffix();
    }

    fn rebuild_suffix(&mut self) {
        self.suffix.clear();
        self.suffix.push(0.0);
        let mut acc = 0.0;
        for gap in self.gaps.iter().rev() {
            acc += gap;
            self.suffix.push(acc);
        }
    }

    /// Per-node rate estimate seen by an object missing `erased` fragments.
    pub fn estimate(&self, erased: u32) -> f64 {
        let w = self
            .max_window
            .saturating_sub(erased as usize)
            .max(1)
            .min(self.gaps.len());
        let mean = self.suffix[w] / w as f64;
        1.0 / (self.n as f64 * mean)
    }
}

/// One critical epoch: the object that sat at the repair-queue tail when a
/// node failure occurred.
#[derive(Debug, Clone)]
pub struct CriticalEpoch {
    /// Queue position in [0, 1); advances by 1/𝒪 per completed repair.
    pub x: f64,
    /// Ids of the failed nodes this object is missing fragments from.
    pub erased: BTreeSet<u64>,
    /// Failure-rate estimate for this object's window, refreshed at every
    /// node failure.
    pub lambda_hat: f64,
}

impl CriticalEpoch {
    pub fn erased_count(&self) -> u32 {
        self.erased.len() as u32
    }

    pub fn erased_fraction(&self, n: u32) -> f64 {
        self.erased.len() as f64 / n as f64
    }

    /// System repair time (years) this epoch requests.
    pub fn requested_time(&self, n: u32, params: &RegulatorParams) -> f64 {
        phi(self.erased_fraction(n), self.x, params) / self.lambda_hat
    }
}

/// Chain of critical epochs, head (largest x) first.
///
/// Invariants maintained: x strictly decreasing from head to tail, erased
/// sets nested by inclusion from head to tail (hence erased counts
/// non-increasing toward the tail).
#[derive(Debug, Clone, Default)]
pub struct EpochQueue {
    epochs: VecDeque<CriticalEpoch>,
}

impl EpochQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    /// Head (largest x) first.
    pub fn iter(&self) -> impl Iterator<Item = &CriticalEpoch> {
        self.epochs.iter()
    }

    /// Oldest outstanding epoch — the one with the largest x and the largest
    /// erased set, i.e. the next object the repair frontier reaches.
    pub fn head(&self) -> Option<&CriticalEpoch> {
        self.epochs.front()
    }

    /// Most recent epoch (smallest x, smallest erased set).
    pub fn tail(&self) -> Option<&CriticalEpoch> {
        self.epochs.back()
    }

    /// Discards all epochs (perfect repair state).
    pub fn clear(&mut self) {
        self.epochs.clear();
    }

    /// Applies a node failure without touching λ̂ fields: every epoch whose
    /// object still held a fragment on `node` loses it, and the queue-tail
    /// object becomes a new critical epoch at x = 0. If the tail epoch
    /// already sits at x = 0 (no repair completed since the last failure)
    /// the tail object is the same object, so no new epoch is created.
    /// Returns the head erased count after the failure.
    pub fn apply_failure(&mut self, node: u64) -> u32 {
        for epoch in &mut self.epochs {
            epoch.erased.insert(node);
        }
        if self.epochs.back().is_none_or(|tail| tail.x > 0.0) {
            self.epochs.push_back(CriticalEpoch {
                x: 0.0,
                erased: BTreeSet::from([node]),
                lambda_hat: f64::NAN,
            });
        }
        self.epochs[0].erased.len() as u32
    }

    /// Applies a node failure and refreshes every λ̂ field from `estimator`
    /// with the post-failure erased counts.
    pub fn on_node_failure(&mut self, node: u64, estimator: &FailureRateEstimator) {
        self.apply_failure(node);
        for epoch in &mut self.epochs {
            epoch.lambda_hat = estimator.estimate(epoch.erased_count());
        }
    }

    /// Advances every epoch by `dx` of the repair cycle; epochs reaching
    /// x = 1 have been repaired and retire. Returns how many retired.
    pub fn on_repair_progress(&mut self, dx: f64) -> usize {
        assert!(dx >= 0.0);
        for epoch in &mut self.epochs {
            epoch.x += dx;
        }
        let mut retired = 0;
        while self
            .epochs
            .front()
            .is_some_and(|epoch| epoch.x >= 1.0 - 1e-12)
        {
            self.epochs.pop_front();
            retired += 1;
        }
        retired
    }

    /// Most urgent requested system repair time (years) over the chain, or
    /// `None` when no epoch is outstanding.
    pub fn requested_time(&self, n: u32, params: &RegulatorParams) -> Option<f64> {
        self.epochs
            .iter()
            .map(|epoch| epoch.requested_time(n, params))
            .min_by(f64::total_cmp)
    }
}

/// Granted read repair rate in bits/s: `8·D_src/T_req` capped at `cap_bps`,
/// with `T_req` the most urgent epoch request. An empty chain (perfect
/// queue) falls back to the nominal request `φ_nom/fallback_lambda_hat`.
pub fn select_repair_rate(
    epochs: &EpochQueue,
    n: u32,
    params: &RegulatorParams,
    d_src_bytes: f64,
    cap_bps: f64,
    fallback_lambda_hat: f64,
) -> f64 {
    assert!(d_src_bytes > 0.0 && cap_bps > 0.0);
    let t_req_years = epochs
        .requested_time(n, params)
        .unwrap_or(params.phi_nom() / fallback_lambda_hat);
    let t_seconds = t_req_years * crate::SECONDS_PER_YEAR;
    (8.0 * d_src_bytes / t_seconds).min(cap_bps)
}

/// Complete regulator state for one simulated cluster: estimator, critical
/// epochs and the last-failure clock, wired together for the event loop.
#[derive(Debug, Clone)]
pub struct Regulator {
    pub params: RegulatorParams,
    pub estimator: FailureRateEstimator,
    pub epochs: EpochQueue,
    n: u32,
    last_failure_years: f64,
}

impl Regulator {
    pub fn new(n: u32, r: u32, params: RegulatorParams, lambda_design: f64) -> Self {
        params.validate().expect("invalid regulator parameters");
        Regulator {
            params,
            estimator: FailureRateEstimator::new(n, r, params.window_coeff, lambda_design),
            epochs: EpochQueue::new(),
            n,
            last_failure_years: 0.0,
        }
    }

    /// Feeds one node failure at absolute time `now_years`.
    pub fn on_node_failure(&mut self, node: u64, now_years: f64) {
        let gap = (now_years - self.last_failure_years).max(0.0);
        self.last_failure_years = now_years;
        self.estimator.record_interarrival(gap);
        self.epochs.on_node_failure(node, &self.estimator);
    }

    /// Advances the repair queue by `dx` of a full cycle (1/𝒪 per object).
    pub fn on_repair_progress(&mut self, dx: f64) {
        self.epochs.on_repair_progress(dx);
    }

    /// Requested system repair time in years (nominal when no epoch is
    /// outstanding).
    pub fn requested_system_repair_time(&self) -> f64 {
        self.epochs
            .requested_time(self.n, &self.params)
            .unwrap_or(self.params.phi_nom() / self.estimator.estimate(0))
    }

    /// Granted read repair rate in bits/s for a system holding
    /// `d_src_bytes` of source data.
    pub fn select_rate(&self, d_src_bytes: f64, cap_bps: f64) -> f64 {
        select_repair_rate(
            &self.epochs,
            self.n,
            &self.params,
            d_src_bytes,
            cap_bps,
            self.estimator.estimate(0),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{exponential, stream, StreamKind};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn spec_params() -> RegulatorParams {
        RegulatorParams {
            f_tar: 0.22222,
            f_threshold: 0.33333,
            gamma: 1.0 / 3.0,
            window_coeff: 7.0 / 6.0,
        }
    }

    #[test]
    fn nominal_fraction_endpoints_and_monotonicity() {
        assert_eq!(nominal_fraction(0.0, 0.07, 3.0), 0.0);
        assert_relative_eq!(
            nominal_fraction(1.0, 0.21, 1.0),
            0.189_415_754_029_812_92,
            max_relative = 1e-12
        );
        let mut prev = -1.0;
        for i in 0..=50 {
            let v = nominal_fraction(i as f64 / 50.0, 1.0 / 3.0, 0.63);
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn defaults_match_code_geometry() {
        let p = RegulatorParams::defaults_for(402, 134);
        assert_relative_eq!(p.f_tar, 2.0 / 9.0, max_relative = 1e-15);
        assert_relative_eq!(p.f_threshold, 1.0 / 3.0, max_relative = 1e-15);
        p.validate().unwrap();
    }

    #[test]
    fn validate_rejects_bad_ranges() {
        let mut p = spec_params();
        p.f_tar = 0.5;
        assert!(p.validate().is_err()); // f_tar above threshold
        p = spec_params();
        p.gamma = 0.0;
        assert!(p.validate().is_err());
        p = spec_params();
        p.window_coeff = -1.0;
        assert!(p.validate().is_err());
    }

    /// Bisection on the level-curve equation in its original exponential
    /// form, independent of the quadratic reduction.
    fn phi_by_root_finder(f: f64, x: f64, params: &RegulatorParams) -> f64 {
        let f_bar = 1.0 - f;
        let tar = 1.0 - params.f_tar;
        let thr = 1.0 - params.f_threshold;
        let phi_nom = params.phi_nom();
        let residual = |phi: f64| {
            let u = f_bar * (-phi * (1.0 - x)).exp();
            let lhs = (1.0 - (-(1.0 - x) * phi).exp()) / (1.0 - (-(1.0 - x) * phi_nom).exp());
            let rhs = ((u - thr) / (tar - thr)).powi(2) * tar / u;
            lhs - rhs
        };
        // The residual is strictly increasing in φ on (0, ln(f̄/f̄_T)/(1−x)).
        let (mut lo, mut hi) = (1e-12, (f_bar / thr).ln() / (1.0 - x) - 1e-12);
        assert!(residual(lo) < 0.0 && residual(hi) > 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if residual(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn phi_quadratic_matches_root_finder() {
        let p = spec_params();
        let quad = phi_unclamped(0.28, 0.5, &p).unwrap();
        let root = phi_by_root_finder(0.28, 0.5, &p);
        assert!((quad - root).abs() < 1e-6, "quad {quad} vs root {root}");
        assert_relative_eq!(quad, 0.035_241_172_935_525, max_relative = 1e-9);
        // Deep below the floor: the published value clamps.
        assert_eq!(phi(0.28, 0.5, &p), p.phi_floor());
    }

    #[test]
    fn phi_root_finder_agreement_across_grid() {
        let p = RegulatorParams::defaults_for(402, 134);
        for &f in &[0.0, 0.05, 0.12, 0.2, 0.3] {
            for &x in &[0.0, 0.25, 0.5, 0.75, 0.9] {
                let quad = phi_unclamped(f, x, &p).unwrap();
                let root = phi_by_root_finder(f, x, &p);
                assert!((quad - root).abs() < 1e-6, "f={f} x={x}: {quad} vs {root}");
            }
        }
    }

    #[test]
    fn phi_nominal_trajectory_requests_nominal_rate() {
        let p = RegulatorParams::defaults_for(402, 134);
        let tar = 1.0 - p.f_tar;
        for &x in &[0.0, 0.2, 0.5, 0.8, 0.95] {
            let f = 1.0 - tar.powf(x);
            let raw = phi_unclamped(f, x, &p).unwrap();
            assert_relative_eq!(raw, p.phi_nom(), max_relative = 1e-9);
            assert_relative_eq!(phi(f, x, &p), p.phi_nom(), max_relative = 1e-12);
        }
        assert_relative_eq!(phi(0.0, 0.0, &p), p.phi_nom(), max_relative = 1e-12);
    }

    #[test]
    fn phi_threshold_and_beyond_hits_floor() {
        let p = RegulatorParams::defaults_for(402, 134);
        assert_eq!(phi(p.f_threshold, 0.4, &p), p.phi_floor());
        assert_eq!(phi(0.9, 0.1, &p), p.phi_floor());
        assert_eq!(phi(1.0, 0.0, &p), p.phi_floor());
        assert!(phi_unclamped(0.5, 0.5, &p).is_none());
    }

    #[test]
    fn phi_monotone_in_f_and_x() {
        let p = RegulatorParams::defaults_for(402, 134);
        let fs: Vec<f64> = (0..=32).map(|i| i as f64 * 0.01).collect();
        let xs: Vec<f64> = (0..=19).map(|i| i as f64 * 0.05).collect();
        for w in fs.windows(2) {
            for &x in &xs {
                assert!(
                    phi(w[1], x, &p) <= phi(w[0], x, &p) + 1e-12,
                    "f: {} -> {} at x={x}",
                    w[0],
                    w[1]
                );
                if let (Some(lo), Some(hi)) =
                    (phi_unclamped(w[1], x, &p), phi_unclamped(w[0], x, &p))
                {
                    assert!(lo <= hi + 1e-12);
                }
            }
        }
        for &f in &fs {
            for w in xs.windows(2) {
                assert!(
                    phi(f, w[1], &p) + 1e-12 >= phi(f, w[0], &p),
                    "x: {} -> {} at f={f}",
                    w[0],
                    w[1]
                );
                if let (Some(lo), Some(hi)) =
                    (phi_unclamped(f, w[0], &p), phi_unclamped(f, w[1], &p))
                {
                    assert!(hi + 1e-12 >= lo);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn phi_stays_clamped(f in 0.0..=1.0f64, x in 0.0..1.0f64) {
            let p = RegulatorParams::defaults_for(402, 134);
            let v = phi(f, x, &p);
            prop_assert!(v >= p.phi_floor() && v <= p.phi_nom());
        }
    }

    #[test]
    fn estimator_recovers_constant_rate_exactly() {
        let (n, lambda) = (402u32, 1.0 / 3.0);
        let mut est = FailureRateEstimator::new(n, 134, 7.0 / 6.0, lambda);
        assert_relative_eq!(est.estimate(0), lambda, max_relative = 1e-12);
        for _ in 0..200 {
            est.record_interarrival(1.0 / (n as f64 * lambda));
        }
        assert_relative_eq!(est.estimate(0), lambda, max_relative = 1e-12);
        assert_relative_eq!(est.estimate(100), lambda, max_relative = 1e-12);
    }

    #[test]
    fn estimator_window_arithmetic() {
        // round(7/6·134) = 156 total; an object missing r = 134 fragments
        // averages the last 156 − 134 = 22 gaps.
        let (n, r, lambda_design) = (402u32, 134u32, 0.25);
        let g0 = 1.0 / (n as f64 * lambda_design);
        let mut est = FailureRateEstimator::new(n, r, 7.0 / 6.0, lambda_design);
        for _ in 0..22 {
            est.record_interarrival(2.0 * g0);
        }
        assert_relative_eq!(est.estimate(r), lambda_design / 2.0, max_relative = 1e-12);
        let mean_full = (134.0 * g0 + 22.0 * 2.0 * g0) / 156.0;
        assert_relative_eq!(
            est.estimate(0),
            1.0 / (n as f64 * mean_full),
            max_relative = 1e-12
        );
        // Window never shrinks below one gap.
        assert_relative_eq!(est.estimate(500), lambda_design / 2.0, max_relative = 1e-12);
    }

    #[test]
    fn estimator_tracks_poisson_history_within_three_sigma() {
        let (n, lambda) = (402u32, 1.0 / 3.0);
        let mut rng = stream(0x0e57, StreamKind::Aux, 9);
        let aggregate = n as f64 * lambda;
        let trials = 100;
        let estimates: Vec<f64> = (0..trials)
            .map(|_| {
                let mut est = FailureRateEstimator::new(n, 134, 7.0 / 6.0, lambda);
                for _ in 0..156 {
                    est.record_interarrival(exponential(&mut rng) / aggregate);
                }
                est.estimate(0)
            })
            .collect();
        let mean = estimates.iter().sum::<f64>() / trials as f64;
        let var = estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (trials - 1) as f64;
        let se = (var / trials as f64).sqrt();
        assert!(
            (mean - lambda).abs() < 3.0 * se,
            "mean {mean} vs {lambda} (se {se})"
        );
    }

    #[test]
    fn epoch_chain_hand_walk() {
        let est = FailureRateEstimator::new(30, 10, 7.0 / 6.0, 1.0);
        let mut q = EpochQueue::new();
        q.on_node_failure(7, &est);
        assert_eq!(q.len(), 1);
        let tail = q.iter().next().unwrap();
        assert_eq!((tail.x, tail.erased_count()), (0.0, 1));

        // 30% of a cycle of repairs, then a second failure on another node.
        q.on_repair_progress(0.3);
        q.on_node_failure(9, &est);
        let chain: Vec<_> = q.iter().collect();
        assert_eq!(chain.len(), 2);
        assert_relative_eq!(chain[0].x, 0.3, max_relative = 1e-12);
        assert_eq!(chain[0].erased_count(), 2); // {7, 9}
        assert_eq!((chain[1].x, chain[1].erased_count()), (0.0, 1)); // {9}

        // Repeat failure of node 7 with the tail still at x = 0: the tail
        // object is unchanged, the head already misses 7.
        q.on_node_failure(7, &est);
        let chain: Vec<_> = q.iter().collect();
        assert_eq!(chain.len(), 2);
        assert_eq!(chain[0].erased_count(), 2);
        assert_eq!(chain[1].erased_count(), 2); // {9, 7}

        // Head retires once a full cycle has passed over it.
        q.on_repair_progress(0.7);
        assert_eq!(q.len(), 1);
        q.on_repair_progress(1.0);
        assert!(q.is_empty());
    }

    #[test]
    fn epoch_chain_stays_nested_under_random_events() {
        let est = FailureRateEstimator::new(24, 8, 7.0 / 6.0, 2.0);
        let mut rng = stream(0x0e57, StreamKind::Aux, 10);
        let mut q = EpochQueue::new();
        for _ in 0..3000 {
            if crate::rng::uniform_co(&mut rng) < 0.3 {
                let node = crate::rng::uniform_u64(&mut rng, 24);
                q.on_node_failure(node, &est);
            } else {
                q.on_repair_progress(0.01);
            }
            let chain: Vec<_> = q.iter().collect();
            for pair in chain.windows(2) {
                assert!(pair[0].x > pair[1].x, "x not strictly decreasing");
                assert!(pair[0].erased_count() >= pair[1].erased_count());
                assert!(
                    pair[1].erased.is_subset(&pair[0].erased),
                    "erased sets not nested"
                );
            }
            if let Some(head) = chain.first() {
                assert!(head.x < 1.0);
            }
        }
    }

    #[test]
    fn select_rate_empty_chain_is_nominal() {
        let (n, r, lambda) = (402u32, 134u32, 1.0 / 3.0);
        let p = RegulatorParams::defaults_for(n, r);
        let d_src = 1e15;
        let rate = select_repair_rate(&EpochQueue::new(), n, &p, d_src, f64::INFINITY, lambda);
        let expected = 8.0 * d_src * lambda / (p.phi_nom() * crate::SECONDS_PER_YEAR);
        assert_relative_eq!(rate, expected, max_relative = 1e-12);

        // A single fresh epoch with no erasures requests exactly the same.
        let mut q = EpochQueue::new();
        q.epochs.push_back(CriticalEpoch {
            x: 0.0,
            erased: BTreeSet::new(),
            lambda_hat: lambda,
        });
        let rate = select_repair_rate(&q, n, &p, d_src, f64::INFINITY, lambda);
        assert_relative_eq!(rate, expected, max_relative = 1e-12);
    }

    #[test]
    fn select_rate_matches_brute_force_minimum() {
        let (n, r) = (402u32, 134u32);
        let p = RegulatorParams::defaults_for(n, r);
        let d_src = 2.0e15;
        let mut q = EpochQueue::new();
        let specs = [(0.7, 40u64, 0.31), (0.35, 80, 0.42), (0.0, 10, 0.29)];
        for (x, erased_count, lambda_hat) in specs {
            q.epochs.push_back(CriticalEpoch {
                x,
                erased: (0..erased_count).collect(),
                lambda_hat,
            });
        }
        let brute_t = specs
            .iter()
            .map(|&(x, e, lh)| phi(e as f64 / n as f64, x, &p) / lh)
            .fold(f64::INFINITY, f64::min);
        let expected = 8.0 * d_src / (brute_t * crate::SECONDS_PER_YEAR);
        let rate = select_repair_rate(&q, n, &p, d_src, f64::INFINITY, 1.0);
        assert_relative_eq!(rate, expected, max_relative = 1e-12);
    }

    #[test]
    fn select_rate_saturates_at_cap() {
        let (n, r) = (402u32, 134u32);
        let p = RegulatorParams::defaults_for(n, r);
        let mut q = EpochQueue::new();
        q.epochs.push_back(CriticalEpoch {
            x: 0.2,
            erased: (0..150).collect(), // beyond the hard threshold
            lambda_hat: 0.5,
        });
        let cap = 1e9;
        assert_eq!(select_repair_rate(&q, n, &p, 1e18, cap, 0.5), cap);
    }

    #[test]
    fn select_rate_scales_with_estimate() {
        let (n, r) = (402u32, 134u32);
        let p = RegulatorParams::defaults_for(n, r);
        let mut base = EpochQueue::new();
        let mut scaled = EpochQueue::new();
        for (x, count, lh) in [(0.6, 30u64, 0.4), (0.1, 5, 0.37)] {
            base.epochs.push_back(CriticalEpoch {
                x,
                erased: (0..count).collect(),
                lambda_hat: lh,
            });
            scaled.epochs.push_back(CriticalEpoch {
                x,
                erased: (0..count).collect(),
                lambda_hat: 3.0 * lh,
            });
        }
        let r1 = select_repair_rate(&base, n, &p, 1e15, f64::INFINITY, 0.4);
        let r3 = select_repair_rate(&scaled, n, &p, 1e15, f64::INFINITY, 1.2);
        assert_relative_eq!(r3, 3.0 * r1, max_relative = 1e-12);
    }

    #[test]
    fn regulator_facade_walks_events() {
        let (n, r, lambda) = (402u32, 134u32, 1.0 / 3.0);
        let mut reg = Regulator::new(n, r, RegulatorParams::defaults_for(n, r), lambda);
        // Perfect queue: nominal request at the design estimate.
        assert_relative_eq!(
            reg.requested_system_repair_time(),
            reg.params.phi_nom() / lambda,
            max_relative = 1e-12
        );
        reg.on_node_failure(17, 0.01);
        assert_eq!(reg.epochs.len(), 1);
        assert!(reg.requested_system_repair_time() > 0.0);
        reg.on_repair_progress(0.5);
        reg.on_node_failure(23, 0.013);
        assert_eq!(reg.epochs.len(), 2);
        // The rate responds to both urgency and the cap.
        let uncapped = reg.select_rate(1e15, f64::INFINITY);
        assert_eq!(reg.select_rate(1e15, uncapped / 2.0), uncapped / 2.0);
        reg.on_repair_progress(2.0);
        assert!(reg.epochs.is_empty());
    }
}
