//! Analytic reliability machinery.
//!
//! Everything here is a pure function, evaluated in the log domain wherever
//! tails get small: binomial pmfs, the fixed-rate MTTDL estimate and its
//! sandwich lower bound, the repair-queue transition law, a large-deviation
//! exponent, the greedy missing-at-repair recursions (known failure rate, and
//! jointly with an on-line failure-rate estimate), the regulated MTTDL lower
//! bound, the repair-efficiency bound, and peak-rate inversion for a target
//! MTTDL.
//!
//! Conventions: `B(n, m, q) = C(n,m) · q^(n−m) · (1−q)^m` is the probability
//! that exactly `m` of `n` fragments are erased when each survives with
//! probability `q` independently. Distributions over erased-fragment counts
//! are dense vectors indexed `0..=n`. Rates are per year, times in years.

use thiserror::Error;

/// Distribution of the number of erased fragments of an object.
#[derive(Debug, Clone, PartialEq)]
pub struct FragmentDistribution {
    /// `probs[s]` = P(exactly `s` fragments erased), `s = 0..=n`.
    pub probs: Vec<f64>,
}

impl FragmentDistribution {
    pub fn n(&self) -> usize {
        self.probs.len() - 1
    }

    /// P(erased > s), summed smallest-terms-first for accuracy.
    pub fn tail_gt(&self, s: usize) -> f64 {
        self.probs.iter().skip(s + 1).rev().sum()
    }

    pub fn mean(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(i, p)| i as f64 * p)
            .sum()
    }

    pub fn total_variation(&self, other: &FragmentDistribution) -> f64 {
        assert_eq!(self.probs.len(), other.probs.len());
        0.5 * self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    }

    /// Σ_{s≥0} P(erased > s) = expected erased count.
    pub fn sum_of_tails(&self) -> f64 {
        (0..self.probs.len()).map(|s| self.tail_gt(s)).sum()
    }
}

#[derive(Debug, Error)]
pub enum BoundsError {
    #[error("target MTTDL of {0} years is unreachable by adjusting the repair cycle time")]
    TargetUnreachable(f64),
    #[error(
        "estimation recursion did not converge: residual mass {residual:e} after {epochs} epochs"
    )]
    NoConvergence { residual: f64, epochs: usize },
    #[error("invalid parameter: {0}")]
    BadParameter(&'static str),
}

/// ln(n!) — exact summation for small n, Stirling series beyond.
pub fn ln_factorial(n: u64) -> f64 {
    if n < 2 {
        return 0.0;
    }
    if n <= 32 {
        let mut acc = 0.0;
        for k in 2..=n {
            acc += (k as f64).ln();
        }
        return acc;
    }
    let x = n as f64;
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    x * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI * x).ln() + inv / 12.0
        - inv * inv2 / 360.0
        + inv * inv2 * inv2 / 1260.0
}

/// ln C(n, m).
pub fn ln_choose(n: u64, m: u64) -> f64 {
    assert!(m <= n, "ln_choose: m > n");
    ln_factorial(n) - ln_factorial(m) - ln_factorial(n - m)
}

/// ln B(n, m, q) = ln C(n,m) + (n−m)·ln q + m·ln(1−q).
///
/// `q` is the per-fragment survival probability and `m` counts erasures.
/// Boundary cases (`q` = 0 or 1) follow the 0·ln 0 = 0 convention, yielding
/// −∞ for impossible outcomes.
pub fn binom_log_pmf(n: u64, m: u64, q: f64) -> f64 {
    assert!(m <= n, "binom_log_pmf: m > n");
    assert!((0.0..=1.0).contains(&q), "binom_log_pmf: q out of [0,1]");
    if q == 0.0 {
        return if m == n { 0.0 } else { f64::NEG_INFINITY };
    }
    if q == 1.0 {
        return if m == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    ln_choose(n, m) + (n - m) as f64 * q.ln() + m as f64 * (-q).ln_1p()
}

fn log_sum_exp(terms: impl Iterator<Item = f64> + Clone) -> f64 {
    let mx = terms.clone().fold(f64::NEG_INFINITY, f64::max);
    if mx == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    mx + terms.map(|v| (v - mx).exp()).sum::<f64>().ln()
}

/// Distribution of erased fragments at the head of a fixed-rate repair queue:
/// `q(s) = B(n, s, e^{−λT})`.
pub fn head_of_queue_dist(n: u32, lambda: f64, t_years: f64) -> FragmentDistribution {
    assert!(lambda >= 0.0 && t_years >= 0.0);
    let q = (-lambda * t_years).exp();
    let probs = (0..=n as u64)
        .map(|s| binom_log_pmf(n as u64, s, q).exp())
        .collect();
    FragmentDistribution { probs }
}

/// ln P(erased > r) at the head of a fixed-rate queue, in log domain so that
/// extreme tails (large n, large λT) never underflow.
pub fn ln_head_tail_gt(n: u32, r: u32, lambda: f64, t_years: f64) -> f64 {
    assert!(r < n);
    let q = (-lambda * t_years).exp();
    log_sum_exp((r as u64 + 1..=n as u64).map(|s| binom_log_pmf(n as u64, s, q)))
}

/// An MTTDL carried in both linear and log form, so astronomically large
/// results survive even when the linear value overflows to +∞.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MttdlYears {
    pub years: f64,
    pub ln_years: f64,
}

impl MttdlYears {
    fn from_ln(ln_years: f64) -> Self {
        MttdlYears {
            years: ln_years.exp(),
            ln_years,
        }
    }

    pub fn log10(&self) -> f64 {
        self.ln_years / std::f64::consts::LN_10
    }
}

/// Fixed-rate MTTDL estimate `1/(λ·(n−r)·q(r))` with `q(r) = B(n, r, e^{−λT})`.
///
/// `t_years` is the full repair-cycle time (the time the repair process takes
/// to traverse the whole queue once).
pub fn mttdl_estimate_fixed(n: u32, r: u32, lambda: f64, t_years: f64) -> MttdlYears {
    assert!(r < n, "mttdl_estimate_fixed: r must be < n");
    assert!(lambda > 0.0 && t_years > 0.0);
    let q = (-lambda * t_years).exp();
    let ln_qr = binom_log_pmf(n as u64, r as u64, q);
    MttdlYears::from_ln(-(lambda.ln() + ((n - r) as f64).ln() + ln_qr))
}

/// Sandwich lower bound `1/(λ·(n−r)·q(r)) − T/(1 − q(>r))`, floored at 0.
pub fn mttdl_sandwich_lower(n: u32, r: u32, lambda: f64, t_years: f64) -> f64 {
    let estimate = mttdl_estimate_fixed(n, r, lambda, t_years);
    let tail = ln_head_tail_gt(n, r, lambda, t_years).exp();
    if tail >= 1.0 {
        return 0.0;
    }
    (estimate.years - t_years / (1.0 - tail)).max(0.0)
}

/// Probability that an object moves from `s_count` to `t_count` erased
/// fragments while advancing a fraction `delta_x` of a fixed-rate queue:
/// `C(n−s, t−s) · p^(n−t) · (1−p)^(t−s)` with `p = e^{−λT·Δx}`.
///
/// The binomial population is the live-fragment count `n−s` at the start of
/// the advance (survivor-count convention).
pub fn queue_transition(
    n: u32,
    s_count: u32,
    t_count: u32,
    delta_x: f64,
    lambda: f64,
    t_years: f64,
) -> f64 {
    assert!(s_count <= t_count && t_count <= n);
    assert!((0.0..=1.0).contains(&delta_x));
    let p = (-lambda * t_years * delta_x).exp();
    binom_log_pmf((n - s_count) as u64, (t_count - s_count) as u64, p).exp()
}

/// Natural-log entropy of a Bernoulli(f).
fn entropy_nat(f: f64) -> f64 {
    let g = 1.0 - f;
    let mut h = 0.0;
    if f > 0.0 {
        h -= f * f.ln();
    }
    if g > 0.0 {
        h -= g * g.ln();
    }
    h
}

/// Large-deviation exponent `E(f, a) = −H(f) + (1−f)·a − f·ln(1−e^{−a})`
/// with H the natural-log entropy.
///
/// `exp(−n·E(m/n, a)) / sqrt(2πn·f(1−f))` approximates `B(n, m, e^{−a})`;
/// the exponent is convex in `f` and vanishes at `f = 1 − e^{−a}`.
pub fn deviation_exponent(f: f64, a: f64) -> f64 {
    assert!(f > 0.0 && f < 1.0 && a > 0.0);
    -entropy_nat(f) + (1.0 - f) * a - f * (-(-a).exp()).ln_1p()
}

fn greedy_recursion(
    n: u32,
    phi: &dyn Fn(f64, f64) -> f64,
    steps: usize,
    init_f: usize,
) -> FragmentDistribution {
    assert!(steps >= 1 && n >= 1);
    let nn = n as usize;
    let delta = 1.0 / steps as f64;
    let mut q = vec![0.0f64; nn + 1];
    q[init_f] = 1.0;
    // Per-step transition: the number of erased fragments is a pure-birth
    // chain with state-dependent rate (n−F)·φ(F/n, x). Freezing x at the
    // step midpoint, the step kernel e^{δ·Q} is evaluated exactly by
    // uniformization, which keeps the within-step feedback of F on φ (a
    // binomial kernel at a common rate drops it and converges only
    // first-order in δ).
    let mut rates = vec![0.0f64; nn + 1];
    let mut cur = vec![0.0f64; nn + 1];
    let mut acc = vec![0.0f64; nn + 1];
    for k in 0..steps {
        let x_mid = (k as f64 + 0.5) * delta;
        for (f_cur, slot) in rates.iter_mut().enumerate() {
            *slot = (nn - f_cur) as f64 * phi(f_cur as f64 / n as f64, x_mid);
        }
        let uni = rates.iter().cloned().fold(0.0, f64::max);
        if uni <= 0.0 {
            continue;
        }
        let a = delta * uni;
        // acc = Σ_m e^{−a} a^m/m! · (P^m q), with P = I + Q/Λ. Stop once the
        // Poisson weights are negligible and past their mode.
        let mut w = (-a).exp();
        cur.copy_from_slice(&q);
        for (slot, v) in acc.iter_mut().zip(&cur) {
            *slot = w * v;
        }
        let mut m = 0u32;
        loop {
            m += 1;
            // cur ← P·cur, in place from the top so each state reads its
            // predecessor's old value.
            for f_cur in (0..=nn).rev() {
                let stay = cur[f_cur] * (1.0 - rates[f_cur] / uni);
                let from_below = if f_cur > 0 {
                    cur[f_cur - 1] * rates[f_cur - 1] / uni
                } else {
                    0.0
                };
                cur[f_cur] = stay + from_below;
            }
            w *= a / m as f64;
            for (slot, v) in acc.iter_mut().zip(&cur) {
                *slot += w * v;
            }
            if w < 1e-18 && m as f64 > a {
                break;
            }
        }
        q.copy_from_slice(&acc);
    }
    FragmentDistribution { probs: q }
}

/// Missing-at-repair distribution of the greedy critical object.
///
/// Iterates `q_{k+1}(F) = Σ_{F'} q_k(F')·B(n−F', F−F', e^{−δ·φ(F'/n, kδ)})`
/// from unit mass at F = 1 through `steps` queue positions (δ = 1/steps) and
/// returns the distribution at the head of the queue. `phi(f, x)` is the
/// requested dimensionless repair effort at damage fraction `f` and queue
/// position `x`.
pub fn greedy_repair_dist(
    n: u32,
    phi: &dyn Fn(f64, f64) -> f64,
    steps: usize,
) -> FragmentDistribution {
    greedy_recursion(n, phi, steps, 1)
}

/// Steady-state missing-at-repair distribution (object starts clean).
pub fn steady_repair_dist(
    n: u32,
    phi: &dyn Fn(f64, f64) -> f64,
    steps: usize,
) -> FragmentDistribution {
    greedy_recursion(n, phi, steps, 0)
}

/// Upper bound on the expected number of fragments repaired per object:
/// the greedy recursion started from F = 0, summed over its upper tails.
pub fn repair_efficiency_bound(n: u32, phi: &dyn Fn(f64, f64) -> f64, steps: usize) -> f64 {
    steady_repair_dist(n, phi, steps).sum_of_tails()
}

/// Regulated MTTDL lower bound `1/(λ·n·q(>r)) − T_max`, floored at 0.
///
/// `greedy_dist` must come from [`greedy_repair_dist`] (critical-object
/// initialization); `t_max_years` is the worst-case full-cycle repair time.
/// A numerically zero tail yields +∞ in both linear and log form.
pub fn mttdl_regulated_lower(
    n: u32,
    r: u32,
    lambda: f64,
    greedy_dist: &FragmentDistribution,
    t_max_years: f64,
) -> MttdlYears {
    let tail = greedy_dist.tail_gt(r as usize);
    let ln_years = -(lambda.ln() + (n as f64).ln() + tail.ln());
    MttdlYears {
        years: (ln_years.exp() - t_max_years).max(0.0),
        ln_years,
    }
}

/// Grid parameters for the estimation-variant greedy recursion.
#[derive(Debug, Clone)]
pub struct GreedyGrid {
    /// Number of queue-position cells (δ = 1/y_cells).
    pub y_cells: usize,
    /// λ̂ grid, log-spaced, ascending (per-node rate, per year).
    pub lambda_grid: Vec<f64>,
    /// Window coefficient c of the rate estimator; the first-order filter
    /// constant is α(F) = 1 − 1/max(2, round(c·r) − F).
    pub window_coeff: f64,
    /// Code repair overhead r, used by the α schedule.
    pub r: u32,
    /// Stop once non-absorbed mass drops below this.
    pub residual_target: f64,
    /// Abort after this many node-failure epochs.
    pub max_epochs: usize,
}

impl GreedyGrid {
    /// Default grid around a design rate: 128 log-spaced λ̂ points spanning
    /// [λ/8, 8λ], δ = 1/2000.
    pub fn default_around(lambda_design: f64, r: u32, window_coeff: f64) -> Self {
        let points = 128usize;
        let lo = lambda_design / 8.0;
        let hi = lambda_design * 8.0;
        let step = (hi / lo).ln() / (points - 1) as f64;
        let lambda_grid = (0..points).map(|i| lo * (step * i as f64).exp()).collect();
        GreedyGrid {
            y_cells: 2000,
            lambda_grid,
            window_coeff,
            r,
            residual_target: 1e-12,
            max_epochs: 100_000,
        }
    }

    fn alpha(&self, f_count: usize) -> f64 {
        let w = ((self.window_coeff * self.r as f64).round() - f_count as f64).max(2.0);
        1.0 - 1.0 / w
    }
}

/// Result of the estimation-variant recursion.
#[derive(Debug, Clone)]
pub struct EstimationOutcome {
    /// Marginal over F at absorption (missing fragments at repair).
    pub dist: FragmentDistribution,
    /// Marginal over the λ̂ grid at absorption.
    pub lambda_marginal: Vec<f64>,
    /// Node-failure epochs propagated before the residual target was met.
    pub epochs: usize,
}

/// Missing-at-repair distribution of the greedy object when the repair rate
/// is steered by an on-line failure-rate estimate. See
/// [`greedy_estimation_detail`] for the full outcome.
pub fn greedy_dist_with_estimation(
    n: u32,
    phi: &dyn Fn(f64, f64) -> f64,
    grid: &GreedyGrid,
    lambda_true: f64,
    init_f: u32,
    init_lambda_probs: &[f64],
) -> Result<FragmentDistribution, BoundsError> {
    greedy_estimation_detail(n, phi, grid, lambda_true, init_f, init_lambda_probs).map(|o| o.dist)
}

/// Propagates the joint distribution over (F, queue position y, estimate λ̂)
/// of the greedy object through node-failure epochs.
///
/// Within an epoch the estimate is constant and mass moves along the queue
/// under the survival law `P(y(t1) > z) = e^{−λ·n·λ̂⁻¹·∫φ}`. At a failure the
/// aggregate inter-arrival gap updates the filtered estimate,
/// `T̂ ← α(F)·T̂ + (1−α(F))·T_gap`, and F increments with probability
/// `1 − F/n`. Queue position y = 1 absorbs (the object is repaired and its
/// estimate freezes). Iterates until the non-absorbed mass falls below
/// `grid.residual_target`.
///
/// Quantization: y lives on cell centers (second-order accurate; the initial
/// transition from the y = 0 boundary is taken in closed form), λ̂ on the
/// supplied log grid with geometric-midpoint bin boundaries. A single-point
/// λ̂ grid freezes the estimate entirely, reducing the computation to the
/// known-rate recursion.
pub fn greedy_estimation_detail(
    n: u32,
    phi: &dyn Fn(f64, f64) -> f64,
    grid: &GreedyGrid,
    lambda_true: f64,
    init_f: u32,
    init_lambda_probs: &[f64],
) -> Result<EstimationOutcome, BoundsError> {
    let nn = n as usize;
    let yc = grid.y_cells;
    let nl = grid.lambda_grid.len();
    if nl == 0 || init_lambda_probs.len() != nl {
        return Err(BoundsError::BadParameter(
            "lambda grid and initial estimate distribution must be non-empty and equal length",
        ));
    }
    if yc < 2 || init_f as usize > nn || !(lambda_true > 0.0) {
        return Err(BoundsError::BadParameter(
            "need y_cells >= 2, init_f <= n and lambda_true > 0",
        ));
    }
    let delta = 1.0 / yc as f64;

    // λ̂-bin upper boundaries at geometric midpoints; the top bin is open.
    let mut bin_hi = vec![f64::INFINITY; nl];
    for l in 0..nl.saturating_sub(1) {
        bin_hi[l] = (grid.lambda_grid[l] * grid.lambda_grid[l + 1]).sqrt();
    }
    let bin_of = |lam: f64| bin_hi.partition_point(|&hi| hi < lam).min(nl - 1);

    let idx = |l: usize, y: usize| l * yc + y;
    let mut alive: Vec<Option<Vec<f64>>> = vec![None; nn + 1];
    let mut next: Vec<Option<Vec<f64>>> = vec![None; nn + 1];
    let mut absorbed_f = vec![0.0f64; nn + 1];
    let mut absorbed_lambda = vec![0.0f64; nl];

    // Scratch, reused across epochs. Ψ is integrated at half-cell resolution
    // so both cell boundaries and cell centers are available.
    let mut psi_half = vec![0.0f64; 2 * yc + 1];
    let mut cell_fail = vec![0.0f64; yc]; // P(fail within cell z | at its left boundary)
    let mut half_fail = vec![0.0f64; yc]; // P(fail before own cell's right boundary | at center)
    let mut reach_b = vec![0.0f64; yc + 1]; // P(no failure from boundary z to y=1)

    // The object starts exactly on the y = 0 cell boundary, half a cell below
    // the first center. Its first transition is propagated from the boundary
    // in closed form — snapping the start to the center would inject the one
    // O(δ) term the center-based engine otherwise avoids.
    {
        let f_cur = init_f as usize;
        let f_frac = f_cur as f64 / n as f64;
        let h = 0.5 * delta;
        for i in 0..2 * yc {
            psi_half[i + 1] = psi_half[i] + h * phi(f_frac, (i as f64 + 0.5) * h);
        }
        let p_stay = f_frac;
        let p_inc = 1.0 - p_stay;
        let alpha = grid.alpha(f_cur);
        let albar = 1.0 - alpha;
        for (l, &m) in init_lambda_probs.iter().enumerate() {
            assert!(m >= 0.0, "negative initial estimate probability");
            if m == 0.0 {
                continue;
            }
            let lam_hat = grid.lambda_grid[l];
            let c = lambda_true * n as f64 / lam_hat;
            let w = m * (-c * psi_half[2 * yc]).exp();
            absorbed_f[f_cur] += w;
            absorbed_lambda[l] += w;
            let t_hat = 1.0 / (n as f64 * lam_hat);
            let mut surv = 1.0; // e^{−c·Ψb(z)}, starting from Ψb(0) = 0
            for z in 0..yc {
                let surv_next = (-c * psi_half[2 * (z + 1)]).exp();
                let land = m * (surv - surv_next);
                surv = surv_next;
                if land <= 0.0 {
                    continue;
                }
                let bin = if nl == 1 {
                    0
                } else {
                    // Gap from the epoch start at y = 0 to the landing center.
                    let t_new = alpha * t_hat + albar * psi_half[2 * z + 1] / lam_hat;
                    bin_of(1.0 / (n as f64 * t_new))
                };
                deposit(&mut next, nn, nl, yc, f_cur, bin, z, land, p_stay, p_inc);
            }
        }
        std::mem::swap(&mut alive, &mut next);
    }

    for epoch in 0..grid.max_epochs {
        let residual: f64 = alive.iter().flatten().map(|g| g.iter().sum::<f64>()).sum();
        if residual < grid.residual_target {
            return Ok(EstimationOutcome {
                dist: FragmentDistribution { probs: absorbed_f },
                lambda_marginal: absorbed_lambda,
                epochs: epoch + 1,
            });
        }

        for slot in next.iter_mut().flatten() {
            slot.iter_mut().for_each(|v| *v = 0.0);
        }

        for f_cur in 0..=nn {
            let src = match alive[f_cur].take() {
                Some(g) => g,
                None => continue,
            };
            if src.iter().sum::<f64>() < 1e-18 {
                continue; // negligible stragglers; loss ≪ any tolerance here
            }
            let f_frac = f_cur as f64 / n as f64;
            let h = 0.5 * delta;
            for i in 0..2 * yc {
                psi_half[i + 1] = psi_half[i] + h * phi(f_frac, (i as f64 + 0.5) * h);
            }
            macro_rules! psi_b {
                ($j:expr) => {
                    psi_half[2 * $j]
                };
            }
            macro_rules! psi_c {
                ($j:expr) => {
                    psi_half[2 * $j + 1]
                };
            }
            let p_stay = f_cur as f64 / n as f64;
            let p_inc = 1.0 - p_stay;
            let alpha = grid.alpha(f_cur);
            let albar = 1.0 - alpha;

            for l in 0..nl {
                let lam_hat = grid.lambda_grid[l];
                let c = lambda_true * n as f64 / lam_hat;
                for z in 0..yc {
                    cell_fail[z] = -(-c * (psi_b!(z + 1) - psi_b!(z))).exp_m1();
                    half_fail[z] = -(-c * (psi_b!(z + 1) - psi_c!(z))).exp_m1();
                }
                reach_b[yc] = 1.0;
                for z in (0..yc).rev() {
                    reach_b[z] = reach_b[z + 1] * (1.0 - cell_fail[z]);
                }

                let mut moving = 0.0;
                for y0 in 0..yc {
                    let m = src[idx(l, y0)];
                    if m > 0.0 {
                        let w = m * (1.0 - half_fail[y0]) * reach_b[y0 + 1];
                        absorbed_f[f_cur] += w;
                        absorbed_lambda[l] += w;
                        moving += m;
                    }
                }
                if moving < 1e-300 {
                    continue;
                }

                // Failure landing in cell z restarts the object at center z
                // with an updated estimate. The λ̂'-bin is set by the
                // center-to-center effort gap ΔΨ = Ψc(z) − Ψc(y0) through
                // T_gap = ΔΨ/λ̂; bin windows in ΔΨ tile [0, ∞) and slide
                // monotonically with z, so each is maintained with two
                // pointers and a running decayed sum.
                let t_hat = 1.0 / (n as f64 * lam_hat);
                // Landing within the source's own cell: ΔΨ quantizes to 0,
                // so T̂' = α·T̂ exactly.
                let diag_bin = if albar <= 0.0 || nl == 1 {
                    l
                } else {
                    bin_of(1.0 / (n as f64 * alpha * t_hat))
                };

                let mut gap_lo = vec![0.0f64; nl];
                let mut gap_hi = vec![f64::INFINITY; nl];
                let (b_first, b_last) = if nl == 1 {
                    (l, l)
                } else {
                    // λ̂' ascending ⇔ T̂' (and ΔΨ) descending; windows are
                    // [gap_lo, gap_hi) with shared edge values so they tile.
                    for b in 0..nl {
                        gap_lo[b] = if b == nl - 1 {
                            0.0
                        } else {
                            let t_lo = 1.0 / (n as f64 * bin_hi[b]);
                            (lam_hat * (t_lo - alpha * t_hat) / albar).max(0.0)
                        };
                        gap_hi[b] = if b == 0 {
                            f64::INFINITY
                        } else {
                            let t_hi = 1.0 / (n as f64 * bin_hi[b - 1]);
                            (lam_hat * (t_hi - alpha * t_hat) / albar).max(0.0)
                        };
                    }
                    // Restrict the sweep to bins whose ΔΨ window intersects
                    // the achievable gap range.
                    let gap_max = psi_c!(yc - 1) - psi_c!(0);
                    let first = (0..nl).find(|&b| gap_lo[b] < gap_max).unwrap_or(nl - 1);
                    let last = (first..nl)
                        .rev()
                        .find(|&b| gap_hi[b] > 0.0)
                        .unwrap_or(first);
                    (first, last.max(first))
                };

                let mut win_a = vec![0usize; nl];
                let mut win_b = vec![0usize; nl];
                let mut sums = vec![0.0f64; nl];
                for z in 0..yc {
                    for b in b_first..=b_last {
                        if z > 0 {
                            sums[b] *= 1.0 - cell_fail[z - 1];
                        }
                        // Entries: y0 joins once its gap reaches gap_lo[b];
                        // only y0 ≤ z−1 are off-diagonal sources.
                        while win_b[b] < z && psi_c!(z) - psi_c!(win_b[b]) >= gap_lo[b] {
                            let y0 = win_b[b];
                            let m = src[idx(l, y0)];
                            if m > 0.0 {
                                let w = if y0 + 1 == z {
                                    1.0 - half_fail[y0]
                                } else {
                                    (-c * (psi_b!(z) - psi_c!(y0))).exp()
                                };
                                sums[b] += m * w;
                            }
                            win_b[b] += 1;
                        }
                        // Exits: the gap grew past gap_hi[b].
                        while win_a[b] < win_b[b] && psi_c!(z) - psi_c!(win_a[b]) >= gap_hi[b] {
                            let y0 = win_a[b];
                            let m = src[idx(l, y0)];
                            if m > 0.0 {
                                sums[b] -= m * (-c * (psi_b!(z) - psi_c!(y0))).exp();
                            }
                            win_a[b] += 1;
                        }
                        if win_a[b] == win_b[b] || sums[b] < 0.0 {
                            sums[b] = 0.0;
                        }
                        let out = sums[b] * cell_fail[z];
                        if out > 0.0 {
                            deposit(&mut next, nn, nl, yc, f_cur, b, z, out, p_stay, p_inc);
                        }
                    }
                    let diag = src[idx(l, z)] * half_fail[z];
                    if diag > 0.0 {
                        deposit(
                            &mut next, nn, nl, yc, f_cur, diag_bin, z, diag, p_stay, p_inc,
                        );
                    }
                }
            }
        }
        std::mem::swap(&mut alive, &mut next);
    }

    let residual: f64 = alive.iter().flatten().map(|g| g.iter().sum::<f64>()).sum();
    Err(BoundsError::NoConvergence {
        residual,
        epochs: grid.max_epochs,
    })
}

#[allow(clippy::too_many_arguments)]
fn deposit(
    next: &mut [Option<Vec<f64>>],
    nn: usize,
    nl: usize,
    yc: usize,
    f_cur: usize,
    bin: usize,
    z: usize,
    mass: f64,
    p_stay: f64,
    p_inc: f64,
) {
    let slot = bin * yc + z;
    if p_stay > 0.0 {
        next[f_cur].get_or_insert_with(|| vec![0.0; nl * yc])[slot] += mass * p_stay;
    }
    if p_inc > 0.0 && f_cur < nn {
        next[f_cur + 1].get_or_insert_with(|| vec![0.0; nl * yc])[slot] += mass * p_inc;
    }
}

/// Peak repair rate (bits/s) achieving `target_mttdl_years` under the
/// fixed-rate estimate, by bisection on the repair cycle time T.
///
/// `d_src_bytes` is the total source data; the returned rate is `8·D_src/T`.
/// The search runs over the branch where the mean erased count stays below r
/// (MTTDL decreasing in T); targets outside that branch's range error out.
pub fn invert_rate_for_mttdl(
    n: u32,
    r: u32,
    lambda: f64,
    d_src_bytes: f64,
    target_mttdl_years: f64,
) -> Result<f64, BoundsError> {
    assert!(r < n && lambda > 0.0 && d_src_bytes > 0.0);
    if !(target_mttdl_years > 0.0) {
        return Err(BoundsError::BadParameter("target MTTDL must be positive"));
    }
    let eval = |lt: f64| mttdl_estimate_fixed(n, r, lambda, lt / lambda).ln_years;
    let target_ln = target_mttdl_years.ln();
    let (mut lo, mut hi) = (1e-9, -(1.0 - r as f64 / n as f64).ln());
    if eval(lo) < target_ln || eval(hi) > target_ln {
        return Err(BoundsError::TargetUnreachable(target_mttdl_years));
    }
    for _ in 0..120 {
        let mid = 0.5 * (lo + hi);
        if eval(mid) > target_ln {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t_seconds = 0.5 * (lo + hi) / lambda * crate::SECONDS_PER_YEAR;
    Ok(8.0 * d_src_bytes / t_seconds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{exponential, stream, StreamKind};
    use approx::assert_relative_eq;

    fn assert_normalized(d: &FragmentDistribution) {
        assert!(d.probs.iter().all(|&p| p >= 0.0));
        let sum: f64 = d.probs.iter().sum();
        assert!((sum - 1.0).abs() < 1e-9, "sum = {sum:.12}");
    }

    #[test]
    fn ln_factorial_matches_direct_product() {
        assert_relative_eq!(ln_factorial(10), (3628800.0f64).ln(), max_relative = 1e-14);
        for n in 30..40u64 {
            let direct: f64 = (2..=n).map(|k| (k as f64).ln()).sum();
            assert_relative_eq!(ln_factorial(n), direct, max_relative = 1e-13);
        }
    }

    #[test]
    fn binom_log_pmf_exact_rational() {
        // B(4, 2, 1/2) = C(4,2)/16 = 6/16.
        assert_relative_eq!(
            binom_log_pmf(4, 2, 0.5),
            (6.0f64 / 16.0).ln(),
            epsilon = 1e-15
        );
        assert_relative_eq!(binom_log_pmf(7, 0, 0.9), 7.0 * 0.9f64.ln(), epsilon = 1e-15);
    }

    #[test]
    fn binom_log_pmf_matches_statrs() {
        use statrs::distribution::{Binomial, Discrete};
        for &(n, q) in &[(25u64, 0.73f64), (60, 0.031), (11, 0.5)] {
            let reference = Binomial::new(1.0 - q, n).unwrap();
            for m in 0..=n {
                let ours = binom_log_pmf(n, m, q);
                let theirs = reference.ln_pmf(m);
                assert_relative_eq!(ours, theirs, max_relative = 1e-10, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn binom_log_pmf_boundaries() {
        assert_eq!(binom_log_pmf(5, 5, 0.0), 0.0);
        assert_eq!(binom_log_pmf(5, 3, 0.0), f64::NEG_INFINITY);
        assert_eq!(binom_log_pmf(5, 0, 1.0), 0.0);
        assert_eq!(binom_log_pmf(5, 1, 1.0), f64::NEG_INFINITY);
    }

    #[test]
    fn head_dist_normalized_with_binomial_mean() {
        let d = head_of_queue_dist(402, 1.0 / 3.0, 0.63);
        assert_normalized(&d);
        let expect = 402.0 * -(-0.21f64).exp_m1();
        assert_relative_eq!(d.mean(), expect, max_relative = 1e-9);
    }

    #[test]
    fn head_dist_matches_monte_carlo() {
        // Independent oracle: per-fragment exponential lifetimes compared
        // against the repair-cycle age, rather than the binomial formula.
        let n = 20usize;
        let (lambda, t) = (1.0, 0.3);
        let trials = 1_000_000usize;
        let mut rng = stream(0x60f3_11aa, StreamKind::Aux, 0);
        let mut counts = vec![0u64; n + 1];
        for _ in 0..trials {
            let erased = (0..n)
                .filter(|_| exponential(&mut rng) < lambda * t)
                .count();
            counts[erased] += 1;
        }
        let d = head_of_queue_dist(n as u32, lambda, t);
        for s in 0..=n {
            let p = d.probs[s];
            if p < 1e-4 {
                continue;
            }
            let emp = counts[s] as f64 / trials as f64;
            let sigma = (p * (1.0 - p) / trials as f64).sqrt();
            assert!(
                (emp - p).abs() < 3.0 * sigma,
                "s={s}: emp={emp:.6} vs p={p:.6} (3σ={:.6})",
                3.0 * sigma
            );
        }
    }

    #[test]
    fn mttdl_anchor_triple() {
        // (402, 268, 134) code, 1/λ = 3 yr, cycle T = 0.63 yr (λT = 0.21),
        // then the same provisioned rate under 10% / 20% higher failure
        // rates: nine-plus orders of magnitude of MTTDL collapse.
        let m = mttdl_estimate_fixed(402, 134, 1.0 / 3.0, 0.63);
        assert!((2.88e9..=4.32e9).contains(&m.years), "{:e}", m.years);
        let m10 = mttdl_estimate_fixed(402, 134, 1.1 / 3.0, 0.63);
        assert!((0.8e7..=1.2e7).contains(&m10.years), "{:e}", m10.years);
        let m20 = mttdl_estimate_fixed(402, 134, 1.2 / 3.0, 0.63);
        assert!((0.696e5..=1.044e5).contains(&m20.years), "{:e}", m20.years);
    }

    #[test]
    fn mttdl_log_survives_linear_overflow() {
        let m = mttdl_estimate_fixed(1000, 500, 1e-4, 0.01);
        assert!(m.years.is_infinite());
        assert!(m.ln_years.is_finite() && m.ln_years > 700.0);
        assert!(m.log10() > 300.0);
    }

    #[test]
    fn sandwich_below_estimate_and_tight_at_anchor() {
        for &(lambda, t) in &[(1.0 / 3.0, 0.63), (0.5, 0.4), (1.0, 1.2), (2.0, 1.0)] {
            let est = mttdl_estimate_fixed(402, 134, lambda, t);
            let low = mttdl_sandwich_lower(402, 134, lambda, t);
            assert!(low <= est.years * (1.0 + 1e-12));
        }
        let est = mttdl_estimate_fixed(402, 134, 1.0 / 3.0, 0.63);
        let low = mttdl_sandwich_lower(402, 134, 1.0 / 3.0, 0.63);
        assert!(low / est.years > 0.999_999);
        // At the over-driven crossover (mean erased ≈ r) the estimate is a
        // fraction of a year while the T correction dominates: floor engages.
        assert_eq!(mttdl_sandwich_lower(402, 134, 4.0, 0.101), 0.0);
    }

    #[test]
    fn tail_log_domain_no_underflow_at_extremes() {
        // n ≤ 4096, λT ≤ 5: tails must stay finite in log form.
        let ln_tail = ln_head_tail_gt(4096, 4000, 5.0, 1.0);
        assert!(ln_tail.is_finite());
        let ln_pm = binom_log_pmf(4096, 2048, (-5.0f64).exp());
        assert!(ln_pm.is_finite());
        // And a tail asked far below the mean erased count (≈ 4068).
        let ln_tail2 = ln_head_tail_gt(4096, 100, 5.0, 1.0);
        assert!(ln_tail2.is_finite() && ln_tail2 < 0.0);
    }

    #[test]
    fn queue_transition_trivial_and_marginal() {
        for t in 3..=6u32 {
            let p = queue_transition(6, 3, t, 0.0, 0.5, 1.0);
            assert_eq!(p, if t == 3 { 1.0 } else { 0.0 });
        }
        // From s = 0 the transition marginal is the head distribution at Δx.
        let d = head_of_queue_dist(9, 0.7, 1.3);
        for t in 0..=9u32 {
            let p = queue_transition(9, 0, t, 1.0, 0.7, 1.3);
            assert_relative_eq!(p, d.probs[t as usize], max_relative = 1e-12);
        }
    }

    #[test]
    fn queue_transition_matches_monte_carlo() {
        // 8 surviving clocks race an advance of Δx = 0.8 with λT = 0.5.
        let (n, s) = (10u32, 2u32);
        let (lambda, t, dx) = (0.5, 1.0, 0.8);
        let trials = 1_000_000usize;
        let mut rng = stream(0x60f3_11aa, StreamKind::Aux, 1);
        let mut counts = vec![0u64; 11];
        for _ in 0..trials {
            let fails = (0..(n - s))
                .filter(|_| exponential(&mut rng) < lambda * t * dx)
                .count();
            counts[s as usize + fails] += 1;
        }
        for tc in s..=n {
            let p = queue_transition(n, s, tc, dx, lambda, t);
            if p < 1e-4 {
                continue;
            }
            let emp = counts[tc as usize] as f64 / trials as f64;
            let sigma = (p * (1.0 - p) / trials as f64).sqrt();
            assert!((emp - p).abs() < 3.0 * sigma, "t={tc}: {emp} vs {p}");
        }
    }

    #[test]
    fn queue_transition_chapman_kolmogorov() {
        // Composing 0→0.4 and 0.4→1.0 of the queue equals the direct law.
        let (n, lambda, t) = (12u32, 0.7, 1.0);
        for s in [0u32, 3] {
            for tc in s..=n {
                let direct = queue_transition(n, s, tc, 1.0, lambda, t);
                let composed: f64 = (s..=tc)
                    .map(|m| {
                        queue_transition(n, s, m, 0.4, lambda, t)
                            * queue_transition(n, m, tc, 0.6, lambda, t)
                    })
                    .sum();
                assert_relative_eq!(composed, direct, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn deviation_exponent_minimum_location() {
        for &a in &[0.3f64, std::f64::consts::LN_2, 1.5] {
            let (mut lo, mut hi) = (1e-9, 1.0 - 1e-9);
            while hi - lo > 1e-9 {
                let m1 = lo + (hi - lo) / 3.0;
                let m2 = hi - (hi - lo) / 3.0;
                if deviation_exponent(m1, a) < deviation_exponent(m2, a) {
                    hi = m2;
                } else {
                    lo = m1;
                }
            }
            let argmin = 0.5 * (lo + hi);
            let expect = -(-a).exp_m1();
            assert!((argmin - expect).abs() < 1e-6, "a={a}: {argmin} vs {expect}");
            assert!(deviation_exponent(expect, a) < 1e-12);
        }
    }

    #[test]
    fn deviation_exponent_arithmetic_values() {
        // At a = ln 2 the minimizer is f = 1/2 and the exponent vanishes.
        assert!(deviation_exponent(0.5, std::f64::consts::LN_2).abs() < 1e-15);
        // Hand-evaluated: −H(0.3) + 0.7·0.5 − 0.3·ln(1−e^{−1/2}).
        assert_relative_eq!(deviation_exponent(0.3, 0.5), 0.018_961_34, epsilon = 1e-7);
    }

    #[test]
    fn deviation_exponent_stirling_factor() {
        // exp(−n·E)/sqrt(2πn·f(1−f)) tracks the exact pmf within ×1.2
        // at production scale.
        let (n, a) = (402u64, 0.3f64);
        for &m in &[104u64, 130] {
            let f = m as f64 / n as f64;
            let approx = (-(n as f64) * deviation_exponent(f, a)).exp()
                / (2.0 * std::f64::consts::PI * n as f64 * f * (1.0 - f)).sqrt();
            let exact = binom_log_pmf(n, m, (-a).exp()).exp();
            let ratio = approx / exact;
            assert!((1.0 / 1.2..=1.2).contains(&ratio), "m={m}: ratio {ratio}");
        }
    }

    #[test]
    fn greedy_constant_phi_closed_form() {
        // With constant φ the object's n−1 peers each survive the full pass
        // with e^{−φ}: q(F) = B(n−1, F−1, e^{−φ}).
        let (n, phi0) = (30u32, 0.4f64);
        let d = greedy_repair_dist(n, &|_, _| phi0, 1500);
        assert_normalized(&d);
        assert_eq!(d.probs[0], 0.0);
        let q = (-phi0).exp();
        for f_cnt in 1..=n as usize {
            let closed = binom_log_pmf(n as u64 - 1, f_cnt as u64 - 1, q).exp();
            assert!(
                (d.probs[f_cnt] - closed).abs() < 1e-10,
                "F={f_cnt}: {} vs {closed}",
                d.probs[f_cnt]
            );
        }
    }

    #[test]
    fn greedy_constant_phi_head_identity() {
        // n·q(r+1) = e^{λT}·(n−r)·B(n, r, e^{−λT}) ties the greedy tail to
        // the fixed-rate estimate.
        let (n, r, lt) = (50u32, 10u32, 0.3f64);
        let d = greedy_repair_dist(n, &|_, _| lt, 1000);
        let lhs = n as f64 * d.probs[r as usize + 1];
        let rhs = lt.exp() * (n - r) as f64 * binom_log_pmf(n as u64, r as u64, (-lt).exp()).exp();
        assert_relative_eq!(lhs, rhs, max_relative = 1e-10);
    }

    #[test]
    fn greedy_doubling_converges() {
        // Discretization self-convergence at production scale with a
        // non-trivial clamped rate profile.
        let phi_nom = 0.2513f64;
        let phi = |f: f64, x: f64| {
            let f_nom = 0.2222 * x;
            (phi_nom * (1.0 - 1.8 * (f - f_nom))).clamp(phi_nom / 3.0, phi_nom)
        };
        let a = greedy_repair_dist(402, &phi, 2000);
        let b = greedy_repair_dist(402, &phi, 4000);
        assert_normalized(&a);
        assert_normalized(&b);
        let tv = a.total_variation(&b);
        assert!(tv < 1e-6, "tv = {tv:e}");
    }

    #[test]
    fn greedy_monotone_in_phi() {
        // Pointwise smaller φ (faster repair) → stochastically fewer missing.
        let base = |f: f64, x: f64| 0.15 + 0.3 * f + 0.05 * x;
        let fast = |f: f64, x: f64| 0.8 * base(f, x);
        let slow_d = greedy_repair_dist(60, &base, 1200);
        let fast_d = greedy_repair_dist(60, &fast, 1200);
        for s in 0..=60usize {
            assert!(fast_d.tail_gt(s) <= slow_d.tail_gt(s) + 1e-12, "s={s}");
        }
    }

    #[test]
    fn regulated_lower_vs_sandwich_at_anchor() {
        // Constant-φ regulated bound at (402, 268, 134), λT = 0.21: the
        // greedy tail costs ≈ a factor 1−f_tar (with tail-vs-single-term
        // slop) relative to the sandwich bound.
        let (n, r, lambda, t) = (402u32, 134u32, 1.0 / 3.0, 0.63);
        let d = greedy_repair_dist(n, &|_, _| lambda * t, 2000);
        let reg = mttdl_regulated_lower(n, r, lambda, &d, t);
        let sandwich = mttdl_sandwich_lower(n, r, lambda, t);
        assert_relative_eq!(reg.years, 1.6157e9, max_relative = 0.01);
        assert!(reg.years < sandwich);
        let one_minus_ftar = (-lambda * t).exp();
        let ratio = reg.years / sandwich;
        assert!(
            (0.4 * one_minus_ftar..=1.05 * one_minus_ftar).contains(&ratio),
            "ratio {ratio} vs 1−f_tar {one_minus_ftar}"
        );
    }

    #[test]
    fn regulated_lower_empty_tail_is_infinite() {
        let d = FragmentDistribution {
            probs: vec![0.5, 0.5, 0.0, 0.0],
        };
        let m = mttdl_regulated_lower(3, 2, 0.5, &d, 1.0);
        assert!(m.years.is_infinite() && m.ln_years.is_infinite());
    }

    #[test]
    fn efficiency_bound_constant_phi_is_binomial_mean() {
        // From F = 0 under constant φ the head distribution is
        // Bin(n, 1−e^{−φ}); the sum of tails is its mean n·f_tar.
        let eff = repair_efficiency_bound(402, &|_, _| 0.21, 2000);
        assert_relative_eq!(eff, 76.145_133, max_relative = 1e-6);
    }

    #[test]
    fn efficiency_bound_floor_repairs_fewer() {
        let nominal = repair_efficiency_bound(134, &|_, _| 0.21, 1200);
        let floored = repair_efficiency_bound(134, &|_, _| 0.07, 1200);
        assert!(floored < nominal);
    }

    #[test]
    fn estimation_degenerate_grid_reduces_to_known_rate() {
        // Single-point λ̂ grid at the true rate freezes the estimate: the
        // joint recursion must reproduce the known-rate result.
        let (n, phi0) = (20u32, 0.35f64);
        let grid = GreedyGrid {
            y_cells: 2000,
            lambda_grid: vec![1.0],
            window_coeff: 7.0 / 6.0,
            r: 7,
            residual_target: 1e-12,
            max_epochs: 10_000,
        };
        let est = greedy_dist_with_estimation(n, &|_, _| phi0, &grid, 1.0, 1, &[1.0]).unwrap();
        assert_normalized(&est);
        let known = greedy_repair_dist(n, &|_, _| phi0, 2000);
        let tv = est.total_variation(&known);
        assert!(tv < 1e-4, "tv = {tv:e}");
    }

    #[test]
    fn estimation_filter_mean_tracks_true_rate() {
        // With the unbiased gap filter the absorbed λ̂ marginal centers on
        // the true rate (within grid resolution).
        let n = 16u32;
        let lambda_true = 1.0;
        let points = 48usize;
        let step = (64.0f64).ln() / (points - 1) as f64;
        let lambda_grid: Vec<f64> = (0..points)
            .map(|i| 0.125 * (step * i as f64).exp())
            .collect();
        let init_bin = lambda_grid
            .iter()
            .enumerate()
            .min_by(|a, b| {
                (a.1 - lambda_true)
                    .abs()
                    .total_cmp(&(b.1 - lambda_true).abs())
            })
            .unwrap()
            .0;
        let mut init = vec![0.0; points];
        init[init_bin] = 1.0;
        let grid = GreedyGrid {
            y_cells: 600,
            lambda_grid,
            window_coeff: 7.0 / 6.0,
            r: 8,
            residual_target: 1e-10,
            max_epochs: 10_000,
        };
        let out = greedy_estimation_detail(n, &|_, _| 0.3, &grid, lambda_true, 1, &init).unwrap();
        assert_normalized(&out.dist);
        let total: f64 = out.lambda_marginal.iter().sum();
        let mean: f64 = out
            .lambda_marginal
            .iter()
            .zip(&grid.lambda_grid)
            .map(|(p, l)| p * l)
            .sum::<f64>()
            / total;
        assert!(
            (0.8..=1.25).contains(&mean),
            "absorbed λ̂ mean {mean} vs true {lambda_true}"
        );
        assert!(out.epochs > 2);
    }

    #[test]
    fn estimation_reports_non_convergence() {
        let grid = GreedyGrid {
            y_cells: 100,
            lambda_grid: vec![1.0],
            window_coeff: 7.0 / 6.0,
            r: 7,
            residual_target: 1e-12,
            max_epochs: 2,
        };
        let err = greedy_dist_with_estimation(20, &|_, _| 0.35, &grid, 1.0, 1, &[1.0]).unwrap_err();
        match err {
            BoundsError::NoConvergence { residual, epochs } => {
                assert!(residual > 0.0 && epochs == 2);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn invert_rate_hits_target_band() {
        // (3010, 2150, 860), 1/λ = 3 yr, 2150 PiB source, target 10^8 yr.
        let d_src = 2150.0 * (1u64 << 50) as f64;
        let rate = invert_rate_for_mttdl(3010, 860, 1.0 / 3.0, d_src, 1e8).unwrap();
        assert!(
            (650e9..=800e9).contains(&rate),
            "rate = {:.1} Gbps",
            rate / 1e9
        );
        // Round-trip within 0.1%.
        let t_years = 8.0 * d_src / rate / crate::SECONDS_PER_YEAR;
        let back = mttdl_estimate_fixed(3010, 860, 1.0 / 3.0, t_years);
        assert_relative_eq!(back.years, 1e8, max_relative = 1e-3);
        // Monotone: a tougher target needs a faster rate.
        let rate_hi = invert_rate_for_mttdl(3010, 860, 1.0 / 3.0, d_src, 1e10).unwrap();
        assert!(rate_hi > rate);
        // Unreachable target errors out.
        assert!(matches!(
            invert_rate_for_mttdl(10, 2, 1.0, 1e12, 1e300),
            Err(BoundsError::TargetUnreachable(_))
        ));
    }
}
