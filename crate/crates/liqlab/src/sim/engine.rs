//! The event-driven core: node lifecycle, latent corruption, and repair.
//!
//! # Event streams
//!
//! Permanent failures, transient outages, and sector corruptions are drawn
//! from three independent seeded streams as cluster-aggregate Poisson
//! processes (rate `M·λ`, node picked uniformly afterwards), which is exactly
//! the superposition of `M` per-node processes. Arrivals on nodes that are
//! already permanently down are dropped — exact thinning onto the alive
//! population. Because the streams are independent, toggling the transient
//! or sector model leaves the permanent-failure sample path untouched.
//!
//! # Repair
//!
//! Damage is tracked per placement group as a nested chain of critical
//! epochs ([`EpochQueue`]) plus a continuous frontier coordinate measured in
//! repair cycles. Between events the frontier advances in closed form
//! (constant-rate policies) or by midpoint micro-steps bounded by
//! [`MAX_MICRO_STEP`] (the regulated policy, whose rate depends on the
//! frontier position). Step boundaries land exactly on epoch retirements and
//! latent-corruption positions, so nothing is skipped.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeSet, BinaryHeap};

use rand_chacha::ChaCha12Rng;

use crate::failure::{
    sample_loglogistic, sample_next_node_failure, sector_rate_per_node, RateSchedule, RateSegment,
};
use crate::regulator::{phi, EpochQueue, FailureRateEstimator, RegulatorParams};
use crate::rng::{self, StreamKind};
use crate::SECONDS_PER_YEAR;

use super::config::{ClusterConfig, ConfigError, FailureModels, RepairPolicy, RunLimits};
use super::stats::{RateStats, TraceEvent, TraceRow};
use super::{SimOutcome, SimReport};

/// Finest frontier step, in repair cycles, the regulated integrator takes.
/// Configurations with fewer objects step object-by-object (`1/𝒪`) instead.
const MAX_MICRO_STEP: f64 = 1.0 / 64.0;

#[derive(Debug, Clone, Copy, PartialEq)]
enum SlotState {
    Up,
    /// Unresponsive since `since`; `wake` is the scheduled recovery time, or
    /// `None` once the machine is known permanently dead.
    Down { since: f64, wake: Option<f64> },
}

#[derive(Debug, Clone, Copy)]
struct NodeSlot {
    /// Bumped whenever the slot is re-provisioned (declaration or loss
    /// reset); stale heap entries and corruption records check it.
    incarnation: u32,
    state: SlotState,
}

#[derive(Debug, Clone, Copy)]
enum EventKind {
    TransientEnd { wake: f64 },
    TransientStart { duration_years: f64 },
    NodeFail,
    Declare { since: f64 },
    SectorFail { group: u32, position: f64 },
}

impl EventKind {
    /// Tie-break for simultaneous events: recoveries land before new
    /// failures, declarations after the failure that caused them.
    fn priority(&self) -> u8 {
        match self {
            EventKind::TransientEnd { .. } => 0,
            EventKind::TransientStart { .. } => 1,
            EventKind::NodeFail => 2,
            EventKind::Declare { .. } => 3,
            EventKind::SectorFail { .. } => 4,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Event {
    time: f64,
    node: u32,
    incarnation: u32,
    seq: u64,
    kind: EventKind,
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then_with(|| self.kind.priority().cmp(&other.kind.priority()))
            .then_with(|| self.node.cmp(&other.node))
            .then_with(|| self.seq.cmp(&other.seq))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

/// A latent sector corruption, keyed by the frontier coordinate at which the
/// repair pass will read (and thereby discover) it.
#[derive(Debug, Clone, Copy)]
struct Corruption {
    hit: f64,
    node: u32,
    incarnation: u32,
}

impl Ord for Corruption {
    fn cmp(&self, other: &Self) -> Ordering {
        self.hit
            .total_cmp(&other.hit)
            .then_with(|| self.node.cmp(&other.node))
            .then_with(|| self.incarnation.cmp(&other.incarnation))
    }
}

impl PartialOrd for Corruption {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Corruption {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Corruption {}

#[derive(Debug)]
struct GroupState {
    queue: EpochQueue,
    /// Total frontier travel in repair cycles (monotone across cycles).
    progress: f64,
    corruptions: BinaryHeap<Reverse<Corruption>>,
    /// Nodes of this group currently unresponsive (declared ones excluded:
    /// their slots are already replaced).
    down: u32,
}

/// A corruption crossed by the frontier, with the head epoch's state at the
/// moment of the read.
#[derive(Debug, Clone, Copy)]
struct Discovery {
    group: u32,
    node: u32,
    incarnation: u32,
    head_f: u32,
    head_has_node: bool,
}

/// Seeded balanced placement: group `g` takes `n` consecutive positions
/// starting at `g·n` on a random circular permutation of the nodes (wrapping
/// modulo `M`), so the windows tile the circle and every node lands in
/// `⌊P·n/M⌋` or `⌈P·n/M⌉` groups.
pub(crate) fn build_placement(
    m: u32,
    n: u32,
    groups: u32,
    rng: &mut ChaCha12Rng,
) -> Vec<Vec<u32>> {
    let m_us = m as usize;
    let mut perm: Vec<u32> = (0..m).collect();
    for i in (1..m_us).rev() {
        let j = rng::uniform_u64(rng, (i + 1) as u64) as usize;
        perm.swap(i, j);
    }
    (0..groups as usize)
        .map(|g| (0..n as usize).map(|j| perm[(g * n as usize + j) % m_us]).collect())
        .collect()
}

pub(crate) fn invert_placement(group_nodes: &[Vec<u32>], m: u32) -> Vec<Vec<u32>> {
    let mut node_groups = vec![Vec::new(); m as usize];
    for (g, nodes) in group_nodes.iter().enumerate() {
        for &node in nodes {
            node_groups[node as usize].push(g as u32);
        }
    }
    node_groups
}

/// Reactive selection: walk damaged groups in (most missing fragments, group
/// id) order, skip stalled ones, take up to `limit`.
fn select_active(
    pending: &BTreeSet<(Reverse<u32>, u32)>,
    limit: usize,
    mut stalled: impl FnMut(u32, u32) -> bool,
    out: &mut Vec<u32>,
) {
    out.clear();
    for &(Reverse(f), g) in pending {
        if out.len() == limit {
            break;
        }
        if stalled(f, g) {
            continue;
        }
        out.push(g);
    }
}

struct Sim {
    // Static configuration.
    n: u32,
    r: u32,
    m: u32,
    t_rit: f64,
    d_src: f64,
    d_group: f64,
    micro_step: f64,
    regulated: bool,
    reg_params: RegulatorParams,
    estimate_rate: bool,
    /// Constant-rate policies: bits/s granted to each active group.
    per_group_rate_bps: f64,
    /// Constant-rate policies: frontier speed of an active group, cycles/yr.
    group_speed: f64,
    /// Regulated policy: frontier speed at the rate cap, cycles/yr.
    cap_speed: f64,
    active_limit: usize,
    agg_node_schedule: RateSchedule,
    transient_rate: f64,
    transient_median_s: f64,
    transient_shape: f64,
    sector_rate: f64,
    node_groups: Vec<Vec<u32>>,
    trace_on: bool,
    lambda_design: f64,

    // Dynamic state.
    clock: f64,
    slots: Vec<NodeSlot>,
    groups: Vec<GroupState>,
    /// Damaged groups keyed by (missing fragments desc, id asc).
    pending: BTreeSet<(Reverse<u32>, u32)>,
    active: Vec<u32>,
    active_dirty: bool,
    heap: BinaryHeap<Reverse<Event>>,
    seq: u64,
    estimator: FailureRateEstimator,
    last_declare: f64,
    losses: u64,
    declarations: u64,
    stats: RateStats,
    trace: Vec<TraceRow>,
    current_rate: f64,
    traced_rate: f64,
    found: Vec<Discovery>,
    f_at_repair: Vec<f64>,
    bytes_read: f64,
    repaired_cycles: f64,
    rng_fail: ChaCha12Rng,
    rng_trans: ChaCha12Rng,
    rng_sector: ChaCha12Rng,
}

impl Sim {
    fn new(cluster: &ClusterConfig, failure: &FailureModels, trace_on: bool, seed: u64) -> Self {
        let code = cluster.code;
        let m = cluster.nodes;
        let d_src = cluster.d_src_bytes();
        let d_group = cluster.group_source_bytes();

        let agg_node_schedule = RateSchedule {
            segments: failure
                .node
                .segments
                .iter()
                .map(|s| RateSegment {
                    duration_years: s.duration_years,
                    lambda_per_year: s.lambda_per_year * m as f64,
                })
                .collect(),
            cyclic: failure.node.cyclic,
        };
        let (transient_rate, transient_median_s, transient_shape) = match failure.transients {
            Some(t) => {
                (t.occurrence_rate_per_year * m as f64, t.duration_median_seconds, t.duration_shape)
            }
            None => (0.0, 1.0, 1.0),
        };
        let sector_rate = match failure.sectors {
            Some(s) => sector_rate_per_node(&s, cluster.node_capacity_bytes) * m as f64,
            None => 0.0,
        };

        let mut rng_place = rng::stream(seed, StreamKind::Placement, 0);
        let node_groups = invert_placement(
            &build_placement(m, code.n, cluster.placement_groups, &mut rng_place),
            m,
        );

        let (regulated, estimate_rate, reg_params, per_group_rate_bps, cap_bps, active_limit) =
            match cluster.policy {
                RepairPolicy::Reactive { r_peak_bps } => {
                    let limit = cluster.active_group_limit() as usize;
                    (
                        false,
                        false,
                        RegulatorParams::defaults_for(code.n, code.r),
                        r_peak_bps / limit as f64,
                        r_peak_bps,
                        limit,
                    )
                }
                RepairPolicy::FixedLiquid { r_peak_bps } => (
                    false,
                    false,
                    RegulatorParams::defaults_for(code.n, code.r),
                    r_peak_bps,
                    r_peak_bps,
                    1,
                ),
                RepairPolicy::Regulated { rate_cap_bps, estimate_rate, .. } => (
                    true,
                    estimate_rate,
                    cluster.policy.regulator_params().expect("regulated policy"),
                    0.0,
                    rate_cap_bps,
                    1,
                ),
            };
        let lambda_design = failure.design_lambda();

        Sim {
            n: code.n,
            r: code.r,
            m,
            t_rit: cluster.t_rit_years,
            d_src,
            d_group,
            micro_step: (1.0 / cluster.object_count()).max(MAX_MICRO_STEP),
            regulated,
            reg_params,
            estimate_rate,
            per_group_rate_bps,
            group_speed: per_group_rate_bps * SECONDS_PER_YEAR / (8.0 * d_group),
            cap_speed: cap_bps * SECONDS_PER_YEAR / (8.0 * d_src),
            active_limit,
            agg_node_schedule,
            transient_rate,
            transient_median_s,
            transient_shape,
            sector_rate,
            node_groups,
            trace_on,
            lambda_design,
            clock: 0.0,
            slots: vec![NodeSlot { incarnation: 0, state: SlotState::Up }; m as usize],
            groups: (0..cluster.placement_groups)
                .map(|_| GroupState {
                    queue: EpochQueue::new(),
                    progress: 0.0,
                    corruptions: BinaryHeap::new(),
                    down: 0,
                })
                .collect(),
            pending: BTreeSet::new(),
            active: Vec::new(),
            active_dirty: false,
            heap: BinaryHeap::new(),
            seq: 0,
            estimator: FailureRateEstimator::new(
                code.n,
                code.r,
                reg_params.window_coeff,
                lambda_design,
            ),
            last_declare: 0.0,
            losses: 0,
            declarations: 0,
            stats: RateStats::new(),
            trace: Vec::new(),
            current_rate: 0.0,
            traced_rate: 0.0,
            found: Vec::new(),
            f_at_repair: vec![0.0; code.n as usize + 1],
            bytes_read: 0.0,
            repaired_cycles: 0.0,
            rng_fail: rng::stream(seed, StreamKind::NodeFailure, 0),
            rng_trans: rng::stream(seed, StreamKind::Transient, 0),
            rng_sector: rng::stream(seed, StreamKind::Sector, 0),
        }
    }

    fn run(&mut self, limits: &RunLimits) {
        self.schedule_next_failure(0.0);
        self.schedule_next_transient(0.0);
        self.schedule_next_sector(0.0);
        loop {
            if self.losses >= limits.max_losses || self.clock >= limits.max_years {
                break;
            }
            match self.heap.peek().map(|e| e.0.time) {
                Some(t) if t < limits.max_years => {
                    let ev = self.heap.pop().expect("peeked").0;
                    self.advance(ev.time, limits.max_losses);
                    if self.losses >= limits.max_losses {
                        break;
                    }
                    self.handle(ev);
                }
                _ => {
                    self.advance(limits.max_years, limits.max_losses);
                    break;
                }
            }
        }
    }

    // ------------------------------------------------------------------
    // Repair advancement
    // ------------------------------------------------------------------

    /// Advances repair and rate statistics from `self.clock` to `target`,
    /// stopping early only when `max_losses` is reached.
    fn advance(&mut self, target: f64, max_losses: u64) {
        if target <= self.clock {
            return;
        }
        if self.regulated {
            self.advance_regulated(target, max_losses);
        } else {
            self.advance_const(target, max_losses);
        }
    }

    fn reselect_active(&mut self) {
        let groups = &self.groups;
        let r = self.r;
        select_active(
            &self.pending,
            self.active_limit,
            // Fewer than k reachable fragments (missing plus unresponsive,
            // counted conservatively): repair cannot read, the group stalls.
            |f, g| f + groups[g as usize].down > r,
            &mut self.active,
        );
        self.active_dirty = false;
    }

    /// Reactive and fixed-rate policies: every active group's frontier moves
    /// at the same constant speed, so spans between boundaries close in one
    /// step.
    fn advance_const(&mut self, target: f64, max_losses: u64) {
        while self.clock < target && self.losses < max_losses {
            if self.active_dirty {
                self.reselect_active();
            }
            if self.active.is_empty() {
                self.note_rate_exact(self.clock, 0.0);
                self.stats.add(0.0, target - self.clock);
                self.clock = target;
                return;
            }
            let rate = self.active.len() as f64 * self.per_group_rate_bps;
            self.note_rate_exact(self.clock, rate);

            // Farthest the active frontiers can move before a head epoch
            // retires or a latent corruption is read.
            let mut dx = f64::INFINITY;
            for ai in 0..self.active.len() {
                let gs = &self.groups[self.active[ai] as usize];
                dx = dx.min(1.0 - gs.queue.head().expect("active group has damage").x);
                if let Some(&Reverse(c)) = gs.corruptions.peek() {
                    dx = dx.min(c.hit - gs.progress);
                }
            }
            let dx = dx.max(0.0);
            let dt_full = dx / self.group_speed;
            let (step_dx, t_end) = if self.clock + dt_full <= target {
                (dx, self.clock + dt_full)
            } else {
                ((target - self.clock) * self.group_speed, target)
            };
            let step_dt = t_end - self.clock;

            self.found.clear();
            for ai in 0..self.active.len() {
                let g = self.active[ai];
                if self.advance_group(g, step_dx) {
                    self.trace_event(t_end, TraceEvent::Repair);
                }
            }
            self.stats.add(rate, step_dt);
            self.clock = t_end;
            for i in 0..self.found.len() {
                let d = self.found[i];
                self.resolve_discovery(d, t_end);
            }
        }
    }

    /// Regulated policy: the rate follows the epoch queue's requested repair
    /// time, so integrate with midpoint micro-steps.
    fn advance_regulated(&mut self, target: f64, max_losses: u64) {
        while self.clock < target && self.losses < max_losses {
            let gs = &self.groups[0];
            let Some(head) = gs.queue.head() else {
                // Nothing missing: lazy repair sleeps.
                self.note_rate_exact(self.clock, 0.0);
                self.stats.add(0.0, target - self.clock);
                self.clock = target;
                return;
            };
            let head_f = head.erased_count();
            let head_x = head.x;
            if head_f + gs.down > self.r {
                // Fewer than k readable fragments: repair stalls until a
                // node recovers (or the damage is declared and counted).
                self.note_rate_exact(self.clock, 0.0);
                self.stats.add(0.0, target - self.clock);
                self.clock = target;
                return;
            }
            let next_hit =
                gs.corruptions.peek().map_or(f64::INFINITY, |&Reverse(c)| c.hit - gs.progress);
            let h_bound = self.micro_step.min(1.0 - head_x).min(next_hit).max(0.0);

            let t_req = self.requested_time_at(0.5 * h_bound);
            let speed = (1.0 / t_req).min(self.cap_speed);
            let (step_h, t_end) = {
                let dt = h_bound / speed;
                if self.clock + dt <= target {
                    (h_bound, self.clock + dt)
                } else {
                    ((target - self.clock) * speed, target)
                }
            };
            let step_dt = t_end - self.clock;
            let rate = speed * 8.0 * self.d_src / SECONDS_PER_YEAR;

            self.note_rate_smooth(self.clock, rate);
            self.found.clear();
            if self.advance_group(0, step_h) {
                self.trace_event(t_end, TraceEvent::Repair);
            }
            self.stats.add(rate, step_dt);
            self.clock = t_end;
            for i in 0..self.found.len() {
                let d = self.found[i];
                self.resolve_discovery(d, t_end);
            }
        }
    }

    /// The regulator's requested system repair time with every epoch `off`
    /// cycles ahead of its current position: `min φ(f, x+off)/λ̂`.
    fn requested_time_at(&self, off: f64) -> f64 {
        let mut best = f64::INFINITY;
        for ep in self.groups[0].queue.iter() {
            let x = ep.x + off;
            if x >= 1.0 {
                continue;
            }
            let t = phi(ep.erased_fraction(self.n), x, &self.reg_params) / ep.lambda_hat;
            if t < best {
                best = t;
            }
        }
        best
    }

    /// Moves one group's frontier by `step_dx` cycles, collecting latent
    /// corruptions crossed; returns true when this drained the queue.
    fn advance_group(&mut self, g: u32, step_dx: f64) -> bool {
        let old_f;
        let retired;
        {
            let gs = &mut self.groups[g as usize];
            let head = gs.queue.head().expect("advanced group has damage");
            old_f = head.erased_count();
            let new_progress = gs.progress + step_dx;
            while let Some(&Reverse(c)) = gs.corruptions.peek() {
                if c.hit > new_progress {
                    break;
                }
                gs.corruptions.pop();
                self.found.push(Discovery {
                    group: g,
                    node: c.node,
                    incarnation: c.incarnation,
                    head_f: old_f,
                    head_has_node: head.erased.contains(&u64::from(c.node)),
                });
            }
            retired = gs.queue.on_repair_progress(step_dx);
            gs.progress = new_progress;
        }
        self.f_at_repair[old_f as usize] += step_dx;
        self.bytes_read += step_dx * self.d_group;
        self.repaired_cycles += step_dx;
        if retired == 0 {
            return false;
        }
        if !self.regulated {
            self.pending.remove(&(Reverse(old_f), g));
            if let Some(h) = self.groups[g as usize].queue.head() {
                let f = h.erased_count();
                self.pending.insert((Reverse(f), g));
            }
        }
        self.active_dirty = true;
        self.groups[g as usize].queue.is_empty()
    }

    fn resolve_discovery(&mut self, d: Discovery, t: f64) {
        if self.slots[d.node as usize].incarnation != d.incarnation {
            return; // node re-provisioned since: the sector was rewritten
        }
        if d.head_has_node {
            return; // this repair regenerates that fragment anyway
        }
        if matches!(self.slots[d.node as usize].state, SlotState::Down { .. }) {
            // Unreadable but not lost: the pass reads around the node, the
            // corruption stays latent for the next cycle.
            let gs = &mut self.groups[d.group as usize];
            let hit = gs.progress + 1.0;
            gs.corruptions.push(Reverse(Corruption {
                hit,
                node: d.node,
                incarnation: d.incarnation,
            }));
            return;
        }
        if d.head_f + 1 > self.r {
            // The object read here is missing head_f fragments and one more
            // turned out corrupt: fewer than k clean fragments survive.
            self.record_loss(t);
        }
        // Otherwise the read caught it and the fragment is rewritten.
    }

    fn record_loss(&mut self, t: f64) {
        self.losses += 1;
        self.current_rate = 0.0;
        self.traced_rate = 0.0;
        self.trace_event_rate(t, 0.0, TraceEvent::Loss);
        for gs in &mut self.groups {
            gs.queue.clear();
            gs.corruptions.clear();
            gs.down = 0;
        }
        for slot in &mut self.slots {
            slot.incarnation += 1;
            slot.state = SlotState::Up;
        }
        self.pending.clear();
        self.active.clear();
        self.active_dirty = true;
        self.estimator = FailureRateEstimator::new(
            self.n,
            self.r,
            self.reg_params.window_coeff,
            self.lambda_design,
        );
        self.last_declare = t;
    }

    // ------------------------------------------------------------------
    // Lifecycle events
    // ------------------------------------------------------------------

    fn handle(&mut self, ev: Event) {
        let t = ev.time;
        match ev.kind {
            EventKind::NodeFail => {
                self.schedule_next_failure(t);
                self.node_failure(ev.node, t);
            }
            EventKind::TransientStart { duration_years } => {
                self.schedule_next_transient(t);
                self.transient_start(ev.node, duration_years, t);
            }
            EventKind::TransientEnd { wake } => {
                self.transient_end(ev.node, ev.incarnation, wake, t);
            }
            EventKind::Declare { since } => self.declare(ev.node, ev.incarnation, since, t),
            EventKind::SectorFail { group, position } => {
                self.schedule_next_sector(t);
                self.sector_fail(ev.node, group, position, t);
            }
        }
    }

    fn node_failure(&mut self, node: u32, t: f64) {
        let slot = self.slots[node as usize];
        match slot.state {
            // Already permanently down: the thinned aggregate stream skips it.
            SlotState::Down { wake: None, .. } => {}
            SlotState::Down { since, wake: Some(_) } => {
                // A transient outage turned permanent; the declaration timer
                // keeps running from the outage start. A duplicate Declare is
                // harmless (the incarnation check drops the loser).
                self.slots[node as usize].state = SlotState::Down { since, wake: None };
                self.push_event(since + self.t_rit, node, slot.incarnation, EventKind::Declare {
                    since,
                });
                self.trace_event(t, TraceEvent::NodeFail);
            }
            SlotState::Up => {
                self.slots[node as usize].state = SlotState::Down { since: t, wake: None };
                self.mark_down(node);
                self.push_event(t + self.t_rit, node, slot.incarnation, EventKind::Declare {
                    since: t,
                });
                self.trace_event(t, TraceEvent::NodeFail);
            }
        }
    }

    fn transient_start(&mut self, node: u32, duration_years: f64, t: f64) {
        let slot = self.slots[node as usize];
        if slot.state != SlotState::Up {
            return; // already down; an overlapping outage changes nothing
        }
        let end = t + duration_years;
        self.slots[node as usize].state = SlotState::Down { since: t, wake: Some(end) };
        self.mark_down(node);
        if duration_years >= self.t_rit {
            // Will outlive the timer: schedule the declaration; the eventual
            // recovery is moot because the slot gets replaced first.
            self.push_event(t + self.t_rit, node, slot.incarnation, EventKind::Declare {
                since: t,
            });
        } else {
            self.push_event(end, node, slot.incarnation, EventKind::TransientEnd { wake: end });
        }
        self.trace_event(t, TraceEvent::TransientStart);
    }

    fn transient_end(&mut self, node: u32, incarnation: u32, wake: f64, t: f64) {
        let slot = self.slots[node as usize];
        if slot.incarnation != incarnation {
            return;
        }
        if let SlotState::Down { wake: Some(w), .. } = slot.state {
            if w == wake {
                self.slots[node as usize].state = SlotState::Up;
                self.mark_up(node);
                self.trace_event(t, TraceEvent::TransientEnd);
            }
        }
    }

    /// The repair-initiation timer fired: the node's fragments are now
    /// counted missing and a fresh slot takes its place.
    fn declare(&mut self, node: u32, incarnation: u32, since: f64, t: f64) {
        let slot = self.slots[node as usize];
        if slot.incarnation != incarnation {
            return;
        }
        match slot.state {
            SlotState::Down { since: s, .. } if s == since => {}
            _ => return,
        }
        self.declarations += 1;
        self.slots[node as usize].incarnation += 1;
        self.slots[node as usize].state = SlotState::Up;
        self.mark_up(node);

        if self.regulated && self.estimate_rate {
            self.estimator.record_interarrival((t - self.last_declare).max(0.0));
        }
        self.last_declare = t;

        for gi in 0..self.node_groups[node as usize].len() {
            let g = self.node_groups[node as usize][gi];
            let old_f = self.groups[g as usize].queue.head().map_or(0, |h| h.erased_count());
            let new_f = if self.regulated {
                self.groups[g as usize].queue.on_node_failure(u64::from(node), &self.estimator);
                self.groups[g as usize].queue.head().map_or(0, |h| h.erased_count())
            } else {
                self.groups[g as usize].queue.apply_failure(u64::from(node))
            };
            if !self.regulated {
                if old_f > 0 {
                    self.pending.remove(&(Reverse(old_f), g));
                }
                self.pending.insert((Reverse(new_f), g));
            }
            if new_f > self.r {
                // More fragments missing than the code tolerates.
                self.record_loss(t);
                return;
            }
        }
        self.active_dirty = true;
    }

    fn sector_fail(&mut self, node: u32, group: u32, position: f64, t: f64) {
        let incarnation = self.slots[node as usize].incarnation;
        let gs = &mut self.groups[group as usize];
        // The corruption sits at fractional cycle position `position`; the
        // frontier reads it at the next crossing.
        let frac = gs.progress - gs.progress.floor();
        let mut delta = position - frac;
        if delta <= 0.0 {
            delta += 1.0;
        }
        let hit = gs.progress + delta;
        gs.corruptions.push(Reverse(Corruption { hit, node, incarnation }));
        self.trace_event(t, TraceEvent::SectorFail);
    }

    fn mark_down(&mut self, node: u32) {
        for gi in 0..self.node_groups[node as usize].len() {
            let g = self.node_groups[node as usize][gi] as usize;
            self.groups[g].down += 1;
        }
        self.active_dirty = true;
    }

    fn mark_up(&mut self, node: u32) {
        for gi in 0..self.node_groups[node as usize].len() {
            let g = self.node_groups[node as usize][gi] as usize;
            debug_assert!(self.groups[g].down > 0, "down counter unbalanced");
            self.groups[g].down -= 1;
        }
        self.active_dirty = true;
    }

    // ------------------------------------------------------------------
    // Event scheduling
    // ------------------------------------------------------------------

    fn push_event(&mut self, time: f64, node: u32, incarnation: u32, kind: EventKind) {
        self.seq += 1;
        self.heap.push(Reverse(Event { time, node, incarnation, seq: self.seq, kind }));
    }

    fn schedule_next_failure(&mut self, now: f64) {
        if let Some(t) = sample_next_node_failure(&self.agg_node_schedule, now, &mut self.rng_fail)
        {
            let node = rng::uniform_u64(&mut self.rng_fail, u64::from(self.m)) as u32;
            self.push_event(t, node, 0, EventKind::NodeFail);
        }
    }

    fn schedule_next_transient(&mut self, now: f64) {
        if self.transient_rate <= 0.0 {
            return;
        }
        let t = now + rng::exponential(&mut self.rng_trans) / self.transient_rate;
        let node = rng::uniform_u64(&mut self.rng_trans, u64::from(self.m)) as u32;
        let duration_years =
            sample_loglogistic(self.transient_median_s, self.transient_shape, &mut self.rng_trans)
                / SECONDS_PER_YEAR;
        self.push_event(t, node, 0, EventKind::TransientStart { duration_years });
    }

    fn schedule_next_sector(&mut self, now: f64) {
        if self.sector_rate <= 0.0 {
            return;
        }
        let mut t = now;
        loop {
            t += rng::exponential(&mut self.rng_sector) / self.sector_rate;
            let node = rng::uniform_u64(&mut self.rng_sector, u64::from(self.m)) as u32;
            let choices = &self.node_groups[node as usize];
            if choices.is_empty() {
                continue; // the node stores no group: nothing to corrupt
            }
            let group = choices[rng::uniform_u64(&mut self.rng_sector, choices.len() as u64) as usize];
            let position = rng::uniform_co(&mut self.rng_sector);
            self.push_event(t, node, 0, EventKind::SectorFail { group, position });
            return;
        }
    }

    // ------------------------------------------------------------------
    // Trace and reporting
    // ------------------------------------------------------------------

    fn trace_event(&mut self, t: f64, event: TraceEvent) {
        if self.trace_on {
            self.trace.push(TraceRow { time_years: t, read_rate_bps: self.current_rate, event });
        }
    }

    fn trace_event_rate(&mut self, t: f64, rate: f64, event: TraceEvent) {
        if self.trace_on {
            self.trace.push(TraceRow { time_years: t, read_rate_bps: rate, event });
        }
    }

    /// Piecewise-constant policies: record every rate transition exactly.
    fn note_rate_exact(&mut self, t: f64, rate: f64) {
        self.current_rate = rate;
        if rate != self.traced_rate {
            self.traced_rate = rate;
            self.trace_event_rate(t, rate, TraceEvent::RateChange);
        }
    }

    /// Smoothly varying regulated rate: record movements beyond 0.5%.
    fn note_rate_smooth(&mut self, t: f64, rate: f64) {
        self.current_rate = rate;
        let base = self.traced_rate;
        let significant =
            if base == 0.0 || rate == 0.0 { rate != base } else { (rate / base - 1.0).abs() > 5e-3 };
        if significant {
            self.traced_rate = rate;
            self.trace_event_rate(t, rate, TraceEvent::RateChange);
        }
    }

    fn finish(mut self) -> SimOutcome {
        debug_assert!(
            (self.stats.total_years() - self.clock).abs() <= 1e-6 * self.clock.max(1.0),
            "rate statistics must cover the whole run"
        );
        let (r_avg, r_99, r_9999, r_peak_observed) =
            self.stats.summary().unwrap_or((0.0, 0.0, 0.0, 0.0));
        let report = SimReport {
            simulated_years: self.clock,
            loss_events: self.losses,
            mttdl_years: self.clock / (self.losses + 1) as f64,
            r_avg,
            r_99,
            r_9999,
            r_peak_observed,
            trace: self.trace_on.then(|| std::mem::take(&mut self.trace)),
        };
        SimOutcome {
            report,
            rate_stats: self.stats,
            f_at_repair: self.f_at_repair,
            bytes_read: self.bytes_read,
            repaired_cycles: self.repaired_cycles,
            declarations: self.declarations,
        }
    }
}

/// Runs one seeded simulation until `run.max_years` or `run.max_losses`,
/// whichever comes first. Identical inputs give identical outputs.
pub fn run_simulation(
    cluster: &ClusterConfig,
    failure: &FailureModels,
    run: &RunLimits,
    seed: u64,
) -> Result<SimOutcome, ConfigError> {
    cluster.validate()?;
    failure.validate()?;
    run.validate()?;
    if let Some(s) = &failure.sectors {
        if cluster.node_capacity_bytes % s.sector_size_bytes != 0 {
            return Err(ConfigError::BadGeometry(
                "node capacity must be a whole number of sectors",
            ));
        }
    }
    let mut sim = Sim::new(cluster, failure, run.trace, seed);
    sim.run(run);
    Ok(sim.finish())
}
