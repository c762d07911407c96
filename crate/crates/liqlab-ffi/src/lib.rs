//! C ABI for the liqlab reliability laboratory.
//!
//! The surface mirrors the library's three public jobs: parse-and-run
//! scenarios, evaluate analytic reliability bounds, and encode/decode
//! erasure-coded blocks. The generated header lives in `include/liqlab.h`.
//!
//! Conventions:
//!
//! * Handles ([`LiqlabScenario`], [`LiqlabSummary`], [`LiqlabCode`]) are
//!   opaque. Create them with the matching `*_parse`/`*_new`/`*_run` call,
//!   release them with the matching `*_free`. A handle is immutable after
//!   creation and may be shared across threads, but creation and destruction
//!   must not race with use.
//! * Fallible calls either return a [`LiqlabStatus`] or a pointer that is
//!   null on failure. Either way, [`liqlab_last_error_message`] returns a
//!   description of the most recent failure on the calling thread.
//! * `char*` values returned to the caller are NUL-terminated UTF-8, owned
//!   by the caller, and must be released with [`liqlab_string_free`].
//! * Panics never unwind across the boundary; they are caught and reported
//!   as [`LiqlabStatus::Panic`] (or a null pointer).

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use liqlab::bounds::{
    greedy_dist_with_estimation, greedy_repair_dist, invert_rate_for_mttdl, mttdl_estimate_fixed,
    mttdl_regulated_lower, mttdl_sandwich_lower, GreedyGrid,
};
use liqlab::codec::ErasureCode;
use liqlab::regulator::{phi, RegulatorParams};
use liqlab::scenario::{
    report_to_json, run_scenario, summarize, summary_to_json, trace_to_csv, Scenario,
    ScenarioSummary,
};
use liqlab::sim::SimOutcome;

/// Result of a liqlab call. Anything but `Ok` leaves a message readable via
/// `liqlab_last_error_message`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LiqlabStatus {
    /// The call succeeded.
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// An argument was out of range or inconsistent with the handle.
    InvalidArgument = 2,
    /// Scenario JSON failed to parse or validate.
    Parse = 3,
    /// An erasure-codec operation failed.
    Codec = 4,
    /// A simulation run failed.
    Simulation = 5,
    /// An internal panic was caught at the boundary.
    Panic = 6,
}

/// Which time-weighted statistic of the repair-read rate to fetch.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LiqlabRateStat {
    /// Time-weighted mean.
    Avg = 0,
    /// 99% quantile by time.
    P99 = 1,
    /// 99.99% quantile by time.
    P9999 = 2,
    /// Largest rate ever requested.
    Peak = 3,
}

/// A parsed, validated scenario (cluster + failure models + run limits).
pub struct LiqlabScenario {
    inner: Scenario,
}

/// The outcome of running every seed of a scenario.
pub struct LiqlabSummary {
    outcomes: Vec<SimOutcome>,
    summary: ScenarioSummary,
}

/// An (n, k) systematic MDS erasure code over GF(2^16).
pub struct LiqlabCode {
    inner: ErasureCode,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    // NUL bytes cannot survive into a C string; replace rather than fail.
    let sanitized = msg.replace('\0', "\\0");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

/// Runs `f`, converting a panic into an error message and `fallback`.
fn guarded<T>(fallback: T, f: impl FnOnce() -> T) -> T {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(value) => value,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            set_error(&format!("internal panic: {msg}"));
            fallback
        }
    }
}

fn into_c_string(text: String) -> *mut c_char {
    match CString::new(text) {
        Ok(c) => c.into_raw(),
        Err(_) => {
            set_error("string contains a NUL byte");
            ptr::null_mut()
        }
    }
}

/// Dereferences a possibly-null handle, reporting `NullPointer` on failure.
macro_rules! try_handle {
    ($ptr:expr, $fallback:expr) => {
        match unsafe { $ptr.as_ref() } {
            Some(handle) => handle,
            None => {
                set_error("null handle");
                return $fallback;
            }
        }
    };
}

/// Library version as a static NUL-terminated string; never null, never freed.
#[no_mangle]
pub extern "C" fn liqlab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message for the most recent failure on the calling thread, or an empty
/// string if nothing failed yet. The pointer stays valid until the next
/// failing liqlab call on the same thread; do not free it.
#[no_mangle]
pub extern "C" fn liqlab_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
///
/// `s` must be a pointer previously returned by a liqlab call that documents
/// `liqlab_string_free` as its destructor, and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn liqlab_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(unsafe { CString::from_raw(s) });
    }
}

// ---------------------------------------------------------------------------
// Scenarios
// ---------------------------------------------------------------------------

/// Parses and validates scenario JSON. Returns null on failure.
///
/// # Safety
///
/// `json` must be a valid NUL-terminated string. The returned handle must be
/// released with `liqlab_scenario_free`.
#[no_mangle]
pub unsafe extern "C" fn liqlab_scenario_parse(json: *const c_char) -> *mut LiqlabScenario {
    guarded(ptr::null_mut(), || {
        if json.is_null() {
            set_error("null json");
            return ptr::null_mut();
        }
        let text = match unsafe { CStr::from_ptr(json) }.to_str() {
            Ok(text) => text,
            Err(_) => {
                set_error("scenario JSON is not valid UTF-8");
                return ptr::null_mut();
            }
        };
        match Scenario::from_json(text) {
            Ok(inner) => Box::into_raw(Box::new(LiqlabScenario { inner })),
            Err(err) => {
                set_error(&err.to_string());
                ptr::null_mut()
            }
        }
    })
}

/// Serializes a scenario back to pretty-printed JSON.
/// Free the result with `liqlab_string_free`.
///
/// # Safety
///
/// `scenario` must be a live handle from `liqlab_scenario_parse` or
/// `liqlab_scenario_scale`.
#[no_mangle]
pub unsafe extern "C" fn liqlab_scenario_to_json(
    scenario: *const LiqlabScenario,
) -> *mut c_char {
    let handle = try_handle!(scenario, ptr::null_mut());
    into_c_string(handle.inner.to_json())
}

/// Number of seeds the scenario will run.
///
/// # Safety
///
/// `scenario` must be a live scenario handle (null returns 0).
#[no_mangle]
pub unsafe extern "C" fn liqlab_scenario_seed_count(scenario: *const LiqlabScenario) -> u64 {
    let handle = try_handle!(scenario, 0);
    handle.inner.run.seeds.len() as u64
}

/// Rescales a scenario onto smaller hardware and faster time while keeping
/// its dimensionless shape: capacities scale by `s_factor`, failure rates by
/// `s_factor * lambda_factor` jointly with rate ceilings, and the run horizon
/// shrinks by `lambda_factor` so expected event counts are unchanged.
/// Returns a new handle, or null if the factors do not keep byte sizes whole.
///
/// # Safety
///
/// `scenario` must be a live scenario handle. The returned handle must be
/// released with `liqlab_scenario_free`.
#[no_mangle]
pub unsafe extern "C" fn liqlab_scenario_scale(
    scenario: *const LiqlabScenario,
    s_factor: f64,
    lambda_factor: f64,
) -> *mut LiqlabScenario {
    let handle = try_handle!(scenario, ptr::null_mut());
    guarded(ptr::null_mut(), || {
        let (cluster, failure) = liqlab::sim::apply_scaling(
            &handle.inner.cluster,
            &handle.inner.failure,
            s_factor,
            lambda_factor,
        );
        let mut scaled = handle.inner.clone();
        scaled.cluster = cluster;
        scaled.failure = failure;
        scaled.run.max_years /= lambda_factor;
        if let Err(err) = scaled.validate() {
            set_error(&err.to_string());
            return ptr::null_mut();
        }
        Box::into_raw(Box::new(LiqlabScenario { inner: scaled }))
    })
}

/// Releases a scenario handle. Null is ignored.
///
/// # Safety
///
/// `scenario` must be a handle from this library, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn liqlab_scenario_free(scenario: *mut LiqlabScenario) {
    if !scenario.is_null() {
        drop(unsafe { Box::from_raw(scenario) });
    }
}

// ---------------------------------------------------------------------------
// Runs
// ---------------------------------------------------------------------------

/// Runs every seed of the scenario (`jobs` worker threads; 0 means 1) and
/// returns a summary handle, or null on failure.
///
/// # Safety
///
/// `scenario` must be a live scenario handle. The returned handle must be
/// released with `liqlab_summary_free`.
#[no_mangle]
pub unsafe extern "C" fn liqlab_scenario_run(
    scenario: *const LiqlabScenario,
    jobs: u32,
) -> *mut LiqlabSummary {
    let handle = try_handle!(scenario, ptr::null_mut());
    guarded(ptr::null_mut(), || {
        match run_scenario(&handle.inner, jobs.max(1) as usize) {
            Ok(outcomes) => {
                let summary = summarize(&handle.inner, &outcomes);
                Box::into_raw(Box::new(LiqlabSummary { outcomes, summary }))
            }
            Err(err) => {
                set_error(&err.to_string());
                ptr::null_mut()
            }
        }
    })
}

/// Number of per-seed runs inside the summary.
///
/// # Safety
///
/// `summary` must be a live summary handle (null returns 0).
#[no_mangle]
pub unsafe extern "C" fn liqlab_summary_runs(summary: *const LiqlabSummary) -> u64 {
    let handle = try_handle!(summary, 0);
    handle.summary.runs
}

/// Simulated years summed over all runs.
///
/// # Safety
///
/// `summary` must be a live summary handle (null returns NaN).
#[no_mangle]
pub unsafe extern "C" fn liqlab_summary_total_years(summary: *const LiqlabSummary) -> f64 {
    let handle = try_handle!(summary, f64::NAN);
    handle.summary.total_simulated_years
}

/// Data-loss events summed over all runs.
///
/// # Safety
///
/// `summary` must be a live summary handle (null returns 0).
#[no_mangle]
pub unsafe extern "C" fn liqlab_summary_total_loss_events(summary: *const LiqlabSummary) -> u64 {
    let handle = try_handle!(summary, 0);
    handle.summary.total_loss_events
}

/// Pooled MTTDL point estimate: total years / (total losses + runs).
///
/// # Safety
///
/// `summary` must be a live summary handle (null returns NaN).
#[no_mangle]
pub unsafe extern "C" fn liqlab_summary_mttdl_years(summary: *const LiqlabSummary) -> f64 {
    let handle = try_handle!(summary, f64::NAN);
    handle.summary.mttdl_years
}

/// One statistic of the pooled repair-read-rate distribution, bits/s.
///
/// # Safety
///
/// `summary` must be a live summary handle (null returns NaN).
#[no_mangle]
pub unsafe extern "C" fn liqlab_summary_rate_bps(
    summary: *const LiqlabSummary,
    stat: LiqlabRateStat,
) -> f64 {
    let handle = try_handle!(summary, f64::NAN);
    match stat {
        LiqlabRateStat::Avg => handle.summary.r_avg,
        LiqlabRateStat::P99 => handle.summary.r_99,
        LiqlabRateStat::P9999 => handle.summary.r_9999,
        LiqlabRateStat::Peak => handle.summary.r_peak_observed,
    }
}

/// The whole summary (aggregate plus per-seed rows) as JSON.
/// Free the result with `liqlab_string_free`.
///
/// # Safety
///
/// `summary` must be a live summary handle.
#[no_mangle]
pub unsafe extern "C" fn liqlab_summary_to_json(summary: *const LiqlabSummary) -> *mut c_char {
    let handle = try_handle!(summary, ptr::null_mut());
    into_c_string(summary_to_json(&handle.summary))
}

/// The report of run `index` (seed order) as JSON, without its trace.
/// Returns null if `index` is out of range.
/// Free the result with `liqlab_string_free`.
///
/// # Safety
///
/// `summary` must be a live summary handle.
#[no_mangle]
pub unsafe extern "C" fn liqlab_summary_report_json(
    summary: *const LiqlabSummary,
    index: u64,
) -> *mut c_char {
    let handle = try_handle!(summary, ptr::null_mut());
    match handle.outcomes.get(index as usize) {
        Some(outcome) => into_c_string(report_to_json(&outcome.report)),
        None => {
            set_error("run index out of range");
            ptr::null_mut()
        }
    }
}

/// The rate/event trace of run `index` as CSV, or null if the scenario was
/// run without tracing or `index` is out of range.
/// Free the result with `liqlab_string_free`.
///
/// # Safety
///
/// `summary` must be a live summary handle.
#[no_mangle]
pub unsafe extern "C" fn liqlab_summary_trace_csv(
    summary: *const LiqlabSummary,
    index: u64,
) -> *mut c_char {
    let handle = try_handle!(summary, ptr::null_mut());
    match handle.outcomes.get(index as usize).and_then(|o| o.report.trace.as_ref()) {
        Some(rows) => into_c_string(trace_to_csv(rows)),
        None => {
            set_error("no trace recorded for that run");
            ptr::null_mut()
        }
    }
}

/// Releases a summary handle. Null is ignored.
///
/// # Safety
///
/// `summary` must be a handle from this library, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn liqlab_summary_free(summary: *mut LiqlabSummary) {
    if !summary.is_null() {
        drop(unsafe { Box::from_raw(summary) });
    }
}

// ---------------------------------------------------------------------------
// Analytic bounds
// ---------------------------------------------------------------------------

fn check_bound_args(n: u32, r: u32, lambda: f64) -> Result<(), LiqlabStatus> {
    if r == 0 || r >= n {
        set_error("need 0 < r < n");
        return Err(LiqlabStatus::InvalidArgument);
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        set_error("lambda must be positive and finite");
        return Err(LiqlabStatus::InvalidArgument);
    }
    Ok(())
}

fn write_out(out: *mut f64, value: f64) -> LiqlabStatus {
    if out.is_null() {
        set_error("null output pointer");
        return LiqlabStatus::NullPointer;
    }
    unsafe { *out = value };
    LiqlabStatus::Ok
}

/// MTTDL estimate for fixed-rate liquid repair with `lambda_t = lambda * T`
/// expected failures per node per repair cycle. `lambda_t = 0` yields +inf.
///
/// # Safety
///
/// `out_mttdl_years` must point to a writable f64.
#[no_mangle]
pub unsafe extern "C" fn liqlab_bound_mttdl_estimate(
    n: u32,
    r: u32,
    lambda_per_year: f64,
    lambda_t: f64,
    out_mttdl_years: *mut f64,
) -> LiqlabStatus {
    guarded(LiqlabStatus::Panic, || {
        if let Err(status) = check_bound_args(n, r, lambda_per_year) {
            return status;
        }
        if !(lambda_t >= 0.0 && lambda_t.is_finite()) {
            set_error("lambda_t must be non-negative and finite");
            return LiqlabStatus::InvalidArgument;
        }
        let years = if lambda_t == 0.0 {
            f64::INFINITY
        } else {
            mttdl_estimate_fixed(n, r, lambda_per_year, lambda_t / lambda_per_year).years
        };
        write_out(out_mttdl_years, years)
    })
}

/// Closed-form lower bound companion to `liqlab_bound_mttdl_estimate`.
///
/// # Safety
///
/// `out_mttdl_years` must point to a writable f64.
#[no_mangle]
pub unsafe extern "C" fn liqlab_bound_mttdl_sandwich(
    n: u32,
    r: u32,
    lambda_per_year: f64,
    lambda_t: f64,
    out_mttdl_years: *mut f64,
) -> LiqlabStatus {
    guarded(LiqlabStatus::Panic, || {
        if let Err(status) = check_bound_args(n, r, lambda_per_year) {
            return status;
        }
        if !(lambda_t >= 0.0 && lambda_t.is_finite()) {
            set_error("lambda_t must be non-negative and finite");
            return LiqlabStatus::InvalidArgument;
        }
        let years = if lambda_t == 0.0 {
            f64::INFINITY
        } else {
            mttdl_sandwich_lower(n, r, lambda_per_year, lambda_t / lambda_per_year)
        };
        write_out(out_mttdl_years, years)
    })
}

/// MTTDL lower bound for the regulated policy with default parameters for
/// `(n, r)`, via the greedy worst-case missing-fragment recursion
/// (`steps` grid points; 4000 is a good default). With `estimate_rate` the
/// regulator is modeled as learning the failure rate online; otherwise it
/// knows `lambda_per_year` exactly. Also reports the per-cycle probability
/// `q_tail` that more than `r` fragments are missing at repair completion
/// (`out_q_tail` may be null if unwanted).
///
/// # Safety
///
/// `out_mttdl_years` must point to a writable f64; `out_q_tail` must be
/// writable or null.
#[no_mangle]
pub unsafe extern "C" fn liqlab_bound_mttdl_regulated(
    n: u32,
    r: u32,
    lambda_per_year: f64,
    estimate_rate: bool,
    steps: u32,
    out_mttdl_years: *mut f64,
    out_q_tail: *mut f64,
) -> LiqlabStatus {
    guarded(LiqlabStatus::Panic, || {
        if let Err(status) = check_bound_args(n, r, lambda_per_year) {
            return status;
        }
        if steps == 0 {
            set_error("steps must be positive");
            return LiqlabStatus::InvalidArgument;
        }
        let params = RegulatorParams::defaults_for(n, r);
        let phi_fn = |f: f64, x: f64| phi(f, x, &params);
        let dist = if estimate_rate {
            let grid = GreedyGrid::default_around(lambda_per_year, r, params.window_coeff);
            let init_bin = grid
                .lambda_grid
                .iter()
                .enumerate()
                .min_by(|(_, a), (_, b)| {
                    (*a - lambda_per_year).abs().total_cmp(&(*b - lambda_per_year).abs())
                })
                .map(|(i, _)| i)
                .expect("grid is never empty");
            let mut init = vec![0.0; grid.lambda_grid.len()];
            init[init_bin] = 1.0;
            match greedy_dist_with_estimation(n, &phi_fn, &grid, lambda_per_year, 1, &init) {
                Ok(dist) => dist,
                Err(err) => {
                    set_error(&err.to_string());
                    return LiqlabStatus::InvalidArgument;
                }
            }
        } else {
            greedy_repair_dist(n, &phi_fn, steps as usize)
        };
        let t_max = params.phi_nom() / lambda_per_year;
        let bound = mttdl_regulated_lower(n, r, lambda_per_year, &dist, t_max);
        if !out_q_tail.is_null() {
            unsafe { *out_q_tail = dist.tail_gt(r as usize) };
        }
        write_out(out_mttdl_years, bound.years)
    })
}

/// Smallest fixed repair-read rate (bits/s) whose estimated MTTDL reaches
/// `target_mttdl_years` for a cluster holding `d_src_bytes` of source data.
///
/// # Safety
///
/// `out_rate_bps` must point to a writable f64.
#[no_mangle]
pub unsafe extern "C" fn liqlab_bound_invert_rate(
    n: u32,
    r: u32,
    lambda_per_year: f64,
    d_src_bytes: f64,
    target_mttdl_years: f64,
    out_rate_bps: *mut f64,
) -> LiqlabStatus {
    guarded(LiqlabStatus::Panic, || {
        if let Err(status) = check_bound_args(n, r, lambda_per_year) {
            return status;
        }
        if !(d_src_bytes > 0.0 && d_src_bytes.is_finite()) {
            set_error("d_src_bytes must be positive and finite");
            return LiqlabStatus::InvalidArgument;
        }
        match invert_rate_for_mttdl(n, r, lambda_per_year, d_src_bytes, target_mttdl_years) {
            Ok(rate) => write_out(out_rate_bps, rate),
            Err(err) => {
                set_error(&err.to_string());
                LiqlabStatus::InvalidArgument
            }
        }
    })
}

// ---------------------------------------------------------------------------
// Erasure codec
// ---------------------------------------------------------------------------

/// Creates an (n, k) systematic MDS code handle (n <= 65536, 0 < k < n).
/// Returns null on failure. Release the handle with `liqlab_code_free`.
#[no_mangle]
pub extern "C" fn liqlab_code_new(n: u32, k: u32) -> *mut LiqlabCode {
    guarded(ptr::null_mut(), || match ErasureCode::new(n, k) {
        Ok(inner) => Box::into_raw(Box::new(LiqlabCode { inner })),
        Err(err) => {
            set_error(&err.to_string());
            ptr::null_mut()
        }
    })
}

/// Encodes one source block into the fragment symbol named by `efi`.
/// `block` holds the k source symbols concatenated (`block_len` bytes, which
/// must equal `k * symbol_len`); the result (`symbol_len` bytes, even) is
/// written to `out_symbol`. Encoded fragment indexes below k return the
/// source symbol verbatim.
///
/// # Safety
///
/// `code` must be a live code handle; `block` must be readable for
/// `block_len` bytes and `out_symbol` writable for `symbol_len` bytes, and
/// the two must not overlap.
#[no_mangle]
pub unsafe extern "C" fn liqlab_code_encode(
    code: *const LiqlabCode,
    block: *const u8,
    block_len: usize,
    efi: u16,
    out_symbol: *mut u8,
    symbol_len: usize,
) -> LiqlabStatus {
    let handle = try_handle!(code, LiqlabStatus::NullPointer);
    if block.is_null() || out_symbol.is_null() {
        set_error("null buffer");
        return LiqlabStatus::NullPointer;
    }
    let k = handle.inner.k() as usize;
    if symbol_len == 0 || block_len != k * symbol_len {
        set_error("block_len must equal k * symbol_len with symbol_len > 0");
        return LiqlabStatus::InvalidArgument;
    }
    let block = unsafe { std::slice::from_raw_parts(block, block_len) };
    let sources: Vec<&[u8]> = block.chunks_exact(symbol_len).collect();
    guarded(LiqlabStatus::Panic, || {
        match handle.inner.encode_block(&sources, &[efi]) {
            Ok(symbols) => {
                let out = unsafe { std::slice::from_raw_parts_mut(out_symbol, symbol_len) };
                out.copy_from_slice(&symbols[0]);
                LiqlabStatus::Ok
            }
            Err(err) => {
                set_error(&err.to_string());
                LiqlabStatus::Codec
            }
        }
    })
}

/// Recovers one source block from `count >= k` distinct received fragments.
/// `efis[i]` names the fragment whose symbol occupies bytes
/// `[i * symbol_len, (i+1) * symbol_len)` of `symbols`; the k source symbols
/// are written concatenated to `out_block` (`k * symbol_len` bytes).
///
/// # Safety
///
/// `code` must be a live code handle; `efis` must be readable for `count`
/// u16 values, `symbols` for `count * symbol_len` bytes, and `out_block`
/// writable for `k * symbol_len` bytes, none overlapping.
#[no_mangle]
pub unsafe extern "C" fn liqlab_code_decode(
    code: *const LiqlabCode,
    efis: *const u16,
    symbols: *const u8,
    count: usize,
    symbol_len: usize,
    out_block: *mut u8,
) -> LiqlabStatus {
    let handle = try_handle!(code, LiqlabStatus::NullPointer);
    if efis.is_null() || symbols.is_null() || out_block.is_null() {
        set_error("null buffer");
        return LiqlabStatus::NullPointer;
    }
    if symbol_len == 0 || count == 0 {
        set_error("count and symbol_len must be positive");
        return LiqlabStatus::InvalidArgument;
    }
    let efis = unsafe { std::slice::from_raw_parts(efis, count) };
    let data = unsafe { std::slice::from_raw_parts(symbols, count * symbol_len) };
    let received: Vec<(u16, &[u8])> =
        efis.iter().copied().zip(data.chunks_exact(symbol_len)).collect();
    guarded(LiqlabStatus::Panic, || match handle.inner.decode_block(&received) {
        Ok(sources) => {
            let k = handle.inner.k() as usize;
            let out = unsafe { std::slice::from_raw_parts_mut(out_block, k * symbol_len) };
            for (slot, symbol) in out.chunks_exact_mut(symbol_len).zip(&sources) {
                slot.copy_from_slice(symbol);
            }
            LiqlabStatus::Ok
        }
        Err(err) => {
            set_error(&err.to_string());
            LiqlabStatus::Codec
        }
    })
}

/// Total fragment count n of the code.
///
/// # Safety
///
/// `code` must be a live code handle (null returns 0).
#[no_mangle]
pub unsafe extern "C" fn liqlab_code_n(code: *const LiqlabCode) -> u16 {
    let handle = try_handle!(code, 0);
    handle.inner.n()
}

/// Source fragment count k of the code.
///
/// # Safety
///
/// `code` must be a live code handle (null returns 0).
#[no_mangle]
pub unsafe extern "C" fn liqlab_code_k(code: *const LiqlabCode) -> u16 {
    let handle = try_handle!(code, 0);
    handle.inner.k()
}

/// Releases a code handle. Null is ignored.
///
/// # Safety
///
/// `code` must be a handle from this library, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn liqlab_code_free(code: *mut LiqlabCode) {
    if !code.is_null() {
        drop(unsafe { Box::from_raw(code) });
    }
}
