//! Command-line front end: scenario simulations, analytic bounds, and the
//! flow-organization codec.
//!
//! Exit codes: 0 success, 1 runtime failure (I/O, corruption), 2 invalid
//! configuration or arguments.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand};
use serde_json::json;
use sha2::{Digest, Sha256};

use liqlab::bounds::{
    greedy_dist_with_estimation, greedy_repair_dist, invert_rate_for_mttdl, mttdl_estimate_fixed,
    mttdl_regulated_lower, mttdl_sandwich_lower, GreedyGrid,
};
use liqlab::codec::{
    plan_chunk_access, AccessMode, AccessPlan, CodecError, ErasureCode, ObjectLayout,
};
use liqlab::regulator::{phi, RegulatorParams};
use liqlab::scenario::{
    report_to_json, run_scenario, summarize, summary_to_json, trace_to_csv, Scenario,
    ScenarioError,
};
use liqlab::sim::apply_scaling;

#[derive(Parser)]
#[command(
    name = "liqlab",
    version,
    about = "Reliability laboratory for erasure-coded distributed storage"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run every seed of a scenario file and write reports, a summary, and
    /// optional trace CSVs.
    Simulate {
        /// Scenario JSON path.
        config: PathBuf,
        /// Output directory (created if missing).
        #[arg(short, long, default_value = ".")]
        output: PathBuf,
        /// Seeds simulated concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Print an analytic MTTDL bound (or its rate inversion) as JSON.
    Bound(BoundArgs),
    /// Rescale a scenario onto smaller capacities and faster clocks while
    /// preserving its dimensionless shape.
    Scale {
        /// Scenario JSON path.
        config: PathBuf,
        /// Capacity factor (node capacity and object size multiply by this).
        #[arg(long = "s-factor", default_value_t = 1.0)]
        s_factor: f64,
        /// Time compression (failure rates multiply, durations divide).
        #[arg(long = "lambda-factor", default_value_t = 1.0)]
        lambda_factor: f64,
        /// Name of the scaled scenario (default: old name + "_scaled").
        #[arg(long)]
        name: Option<String>,
        /// Output path (default: stdout).
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Erasure-code files and plan chunk reads.
    Codec {
        #[command(subcommand)]
        cmd: CodecCmd,
    },
}

#[derive(Args)]
#[command(group = ArgGroup::new("variant").required(true).args([
    "estimate",
    "sandwich",
    "regulated_greedy",
    "regulated_estimated",
    "invert",
]))]
struct BoundArgs {
    /// Fixed-rate MTTDL estimate (Poisson small-term approximation).
    #[arg(long)]
    estimate: bool,
    /// Fixed-rate sandwich lower bound.
    #[arg(long)]
    sandwich: bool,
    /// Regulated lower bound via the greedy known-rate recursion.
    #[arg(long = "regulated-greedy")]
    regulated_greedy: bool,
    /// Regulated lower bound with the on-line failure-rate estimator.
    #[arg(long = "regulated-estimated")]
    regulated_estimated: bool,
    /// Invert the fixed-rate estimate: smallest repair rate meeting --target.
    #[arg(long)]
    invert: bool,

    /// Fragments per object (= nodes).
    #[arg(short)]
    n: u32,
    /// Erasure-correction radius r = n − k.
    #[arg(short)]
    r: u32,
    /// Per-node failure rate, 1/years.
    #[arg(long)]
    lambda: f64,
    /// Dimensionless repair-cycle product λ·T (fixed-rate variants).
    #[arg(long = "lambdaT")]
    lambda_t: Option<f64>,
    /// Source data in pebibytes (--invert).
    #[arg(long = "dsrc-pb")]
    dsrc_pb: Option<f64>,
    /// Target MTTDL in years (--invert).
    #[arg(long)]
    target: Option<f64>,
    /// Recursion depth for the greedy variants.
    #[arg(long, default_value_t = 4000)]
    steps: usize,
}

#[derive(Subcommand)]
enum CodecCmd {
    /// Split a file into n fragments plus a metadata sidecar.
    Encode {
        /// Source file.
        input: PathBuf,
        /// Directory receiving fragment_NNNN.bin and metadata.json.
        #[arg(short, long)]
        output: PathBuf,
        #[arg(short)]
        n: u32,
        #[arg(short)]
        k: u32,
        /// Symbol size in bytes (fragment granularity).
        #[arg(long = "symbol-size", default_value_t = 65536)]
        symbol_size: u32,
    },
    /// Rebuild the original file from any k surviving fragments and verify
    /// its digest.
    Decode {
        /// Directory holding fragments and metadata.json.
        input: PathBuf,
        /// Where to write the reconstructed file.
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Print the read plan for one chunk of an object as JSON.
    Plan {
        #[arg(long = "object-size")]
        object_size: u64,
        #[arg(short)]
        n: u32,
        #[arg(short)]
        k: u32,
        #[arg(long = "symbol-size")]
        symbol_size: u32,
        /// Chunk start, bytes into the object.
        #[arg(long)]
        offset: u64,
        /// Chunk length in bytes.
        #[arg(long)]
        length: u64,
        /// liq (flow), sc (block, direct) or sc-deg (block, degraded).
        #[arg(long)]
        mode: String,
        /// Extra fragments beyond k for flow reads.
        #[arg(long, default_value_t = 30)]
        extra: u16,
        /// Comma-separated EFIs to treat as unreachable.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        unavailable: Vec<u16>,
    },
}

/// Failures the CLI reports: `Usage` exits 2, `Runtime` exits 1.
enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    fn io(context: &str, path: &Path, err: std::io::Error) -> Self {
        CliError::Runtime(format!("{context} {}: {err}", path.display()))
    }
}

impl From<ScenarioError> for CliError {
    fn from(err: ScenarioError) -> Self {
        CliError::Usage(err.to_string())
    }
}

impl From<CodecError> for CliError {
    fn from(err: CodecError) -> Self {
        CliError::Usage(err.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Simulate { config, output, jobs } => cmd_simulate(&config, &output, jobs),
        Cmd::Bound(args) => cmd_bound(&args),
        Cmd::Scale { config, s_factor, lambda_factor, name, output } => {
            cmd_scale(&config, s_factor, lambda_factor, name, output.as_deref())
        }
        Cmd::Codec { cmd } => match cmd {
            CodecCmd::Encode { input, output, n, k, symbol_size } => {
                cmd_encode(&input, &output, n, k, symbol_size)
            }
            CodecCmd::Decode { input, output } => cmd_decode(&input, &output),
            CodecCmd::Plan {
                object_size,
                n,
                k,
                symbol_size,
                offset,
                length,
                mode,
                extra,
                unavailable,
            } => cmd_plan(object_size, n, k, symbol_size, offset, length, &mode, extra, &unavailable),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

/// Prints to stdout, treating a closed pipe (e.g. `liqlab … | head`) as a
/// normal end of output rather than a failure.
fn print_stdout(text: &str) -> Result<(), CliError> {
    use std::io::Write;
    match std::io::stdout().write_all(text.as_bytes()) {
        Ok(()) => Ok(()),
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        Err(e) => Err(CliError::Runtime(format!("writing stdout: {e}"))),
    }
}

/// Writes via a temp file in the same directory so readers never observe a
/// partial file and reruns are byte-for-byte comparable.
fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents).map_err(|e| CliError::io("writing", &tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| CliError::io("renaming", &tmp, e))?;
    Ok(())
}

fn load_scenario(path: &Path) -> Result<Scenario, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io("reading", path, e))?;
    let mut scenario = Scenario::from_json(&text)?;
    if let Ok(override_seed) = std::env::var("LIQLAB_SEED") {
        let seed: u64 = override_seed
            .parse()
            .map_err(|_| CliError::usage(format!("LIQLAB_SEED is not a u64: {override_seed}")))?;
        scenario.run.seeds = vec![seed];
    }
    Ok(scenario)
}

fn cmd_simulate(config: &Path, output: &Path, jobs: usize) -> Result<(), CliError> {
    let scenario = load_scenario(config)?;
    fs::create_dir_all(output).map_err(|e| CliError::io("creating", output, e))?;

    let outcomes = run_scenario(&scenario, jobs)?;
    for (&seed, outcome) in scenario.run.seeds.iter().zip(&outcomes) {
        let stem = format!("{}.seed{}", scenario.name, seed);
        let report_path = output.join(format!("{stem}.report.json"));
        write_atomic(&report_path, &report_to_json(&outcome.report))?;
        eprintln!("wrote {}", report_path.display());
        if let Some(trace) = &outcome.report.trace {
            let trace_path = output.join(format!("{stem}.trace.csv"));
            write_atomic(&trace_path, &trace_to_csv(trace))?;
            eprintln!("wrote {}", trace_path.display());
        }
    }
    let summary = summarize(&scenario, &outcomes);
    let summary_path = output.join(format!("{}.summary.json", scenario.name));
    write_atomic(&summary_path, &summary_to_json(&summary))?;
    eprintln!("wrote {}", summary_path.display());
    Ok(())
}

fn cmd_bound(args: &BoundArgs) -> Result<(), CliError> {
    if args.n == 0 || args.r == 0 || args.r >= args.n {
        return Err(CliError::usage("need 0 < r < n"));
    }
    if !(args.lambda > 0.0 && args.lambda.is_finite()) {
        return Err(CliError::usage("--lambda must be positive"));
    }
    let (n, r, lambda) = (args.n, args.r, args.lambda);

    let need_lambda_t = || {
        args.lambda_t
            .ok_or_else(|| CliError::usage("this variant needs --lambdaT"))
            .and_then(|lt| {
                if lt >= 0.0 && lt.is_finite() {
                    Ok(lt)
                } else {
                    Err(CliError::usage("--lambdaT must be non-negative"))
                }
            })
    };
    let finite = |m: liqlab::bounds::MttdlYears| {
        json!({
            "mttdl_years": m.years,
            "log10_mttdl": m.log10(),
            "infinite": false,
        })
    };

    let (variant, body) = if args.estimate || args.sandwich {
        let lambda_t = need_lambda_t()?;
        let variant = if args.estimate { "estimate" } else { "sandwich" };
        let t_years = lambda_t / lambda;
        let mut body = if lambda_t == 0.0 {
            // No failures per cycle: nothing is ever lost.
            json!({ "mttdl_years": null, "log10_mttdl": null, "infinite": true })
        } else if args.estimate {
            finite(mttdl_estimate_fixed(n, r, lambda, t_years))
        } else {
            let years = mttdl_sandwich_lower(n, r, lambda, t_years);
            json!({ "mttdl_years": years, "log10_mttdl": years.log10(), "infinite": false })
        };
        body["T_years"] = json!(t_years);
        (variant, body)
    } else if args.regulated_greedy || args.regulated_estimated {
        let params = RegulatorParams::defaults_for(n, r);
        let phi_fn = |f: f64, x: f64| phi(f, x, &params);
        let dist = if args.regulated_greedy {
            greedy_repair_dist(n, &phi_fn, args.steps)
        } else {
            let grid = GreedyGrid::default_around(lambda, r, params.window_coeff);
            let init_bin = grid
                .lambda_grid
                .iter()
                .enumerate()
                .min_by(|(_, a), (_, b)| {
                    (*a - lambda).abs().total_cmp(&(*b - lambda).abs())
                })
                .map(|(i, _)| i)
                .expect("grid is never empty");
            let mut init = vec![0.0; grid.lambda_grid.len()];
            init[init_bin] = 1.0;
            greedy_dist_with_estimation(n, &phi_fn, &grid, lambda, 1, &init)
                .map_err(|e| CliError::Runtime(e.to_string()))?
        };
        // Worst-case cycle: the whole population at the slowest request.
        let t_max = params.phi_nom() / lambda;
        let bound = mttdl_regulated_lower(n, r, lambda, &dist, t_max);
        let variant =
            if args.regulated_greedy { "regulated_greedy" } else { "regulated_estimated" };
        (
            variant,
            json!({
                "mttdl_years": bound.years,
                "log10_mttdl": bound.ln_years / std::f64::consts::LN_10,
                "infinite": false,
                "q_tail": dist.tail_gt(r as usize),
                "T_years": t_max,
            }),
        )
    } else {
        let dsrc_pb = args
            .dsrc_pb
            .ok_or_else(|| CliError::usage("--invert needs --dsrc-pb"))?;
        let target = args.target.ok_or_else(|| CliError::usage("--invert needs --target"))?;
        if !(dsrc_pb > 0.0) {
            return Err(CliError::usage("--dsrc-pb must be positive"));
        }
        let d_src_bytes = dsrc_pb * (1u64 << 50) as f64;
        let rate = invert_rate_for_mttdl(n, r, lambda, d_src_bytes, target)
            .map_err(|e| CliError::usage(e.to_string()))?;
        let t_years = 8.0 * d_src_bytes / rate / liqlab::SECONDS_PER_YEAR;
        (
            "invert_rate",
            json!({
                "rate_bps": rate,
                "T_years": t_years,
                "target_mttdl_years": target,
            }),
        )
    };

    let mut out = json!({
        "variant": variant,
        "inputs": {
            "n": n,
            "r": r,
            "lambda_per_year": lambda,
            "lambda_t": args.lambda_t,
            "dsrc_pb": args.dsrc_pb,
            "target_mttdl_years": args.target,
        },
    });
    for (key, value) in body.as_object().expect("body is an object") {
        out[key] = value.clone();
    }
    print_stdout(&format!("{}\n", serde_json::to_string_pretty(&out).expect("bound JSON")))
}

fn cmd_scale(
    config: &Path,
    s_factor: f64,
    lambda_factor: f64,
    name: Option<String>,
    output: Option<&Path>,
) -> Result<(), CliError> {
    if !(s_factor > 0.0 && s_factor.is_finite() && lambda_factor > 0.0 && lambda_factor.is_finite())
    {
        return Err(CliError::usage("scale factors must be positive and finite"));
    }
    let scenario = load_scenario(config)?;
    let (cluster, failure) =
        apply_scaling(&scenario.cluster, &scenario.failure, s_factor, lambda_factor);
    let mut run = scenario.run.clone();
    run.max_years /= lambda_factor;
    let scaled = Scenario {
        name: name.unwrap_or_else(|| format!("{}_scaled", scenario.name)),
        cluster,
        failure,
        run,
    };
    scaled.validate()?;
    let text = scaled.to_json();
    match output {
        Some(path) => {
            write_atomic(path, &text)?;
            eprintln!("wrote {}", path.display());
        }
        None => print_stdout(&text)?,
    }
    Ok(())
}

fn fragment_path(dir: &Path, efi: u16) -> PathBuf {
    dir.join(format!("fragment_{efi:04}.bin"))
}

fn sha256_hex(data: &[u8]) -> String {
    let digest = Sha256::digest(data);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn cmd_encode(input: &Path, output: &Path, n: u32, k: u32, symbol_size: u32) -> Result<(), CliError> {
    let data = fs::read(input).map_err(|e| CliError::io("reading", input, e))?;
    let code = ErasureCode::new(n, k)?;
    let true_size = data.len() as u64;
    let padded = ObjectLayout::padded_size(true_size, k, symbol_size);
    let layout = ObjectLayout::new(padded, k, symbol_size)?;
    let mut object = data;
    object.resize(padded as usize, 0);

    fs::create_dir_all(output).map_err(|e| CliError::io("creating", output, e))?;
    for efi in 0..n as u16 {
        let fragment = layout.make_fragment(&object, efi, &code)?;
        let path = fragment_path(output, efi);
        fs::write(&path, &fragment).map_err(|e| CliError::io("writing", &path, e))?;
    }
    let metadata = json!({
        "n": n,
        "k": k,
        "symbol_size_bytes": symbol_size,
        "true_size_bytes": true_size,
        "padded_size_bytes": padded,
        "sha256": sha256_hex(&object[..true_size as usize]),
    });
    let meta_path = output.join("metadata.json");
    write_atomic(
        &meta_path,
        &format!("{}\n", serde_json::to_string_pretty(&metadata).expect("metadata JSON")),
    )?;
    eprintln!("wrote {} fragments and {}", n, meta_path.display());
    Ok(())
}

fn cmd_decode(input: &Path, output: &Path) -> Result<(), CliError> {
    let meta_path = input.join("metadata.json");
    let meta_text =
        fs::read_to_string(&meta_path).map_err(|e| CliError::io("reading", &meta_path, e))?;
    let meta: serde_json::Value =
        serde_json::from_str(&meta_text).map_err(|e| CliError::usage(format!("metadata: {e}")))?;
    let field_u64 = |key: &str| {
        meta.get(key)
            .and_then(|v| v.as_u64())
            .ok_or_else(|| CliError::usage(format!("metadata lacks numeric field {key}")))
    };
    let n = field_u64("n")? as u32;
    let k = field_u64("k")? as u32;
    let symbol_size = field_u64("symbol_size_bytes")? as u32;
    let true_size = field_u64("true_size_bytes")?;
    let padded = field_u64("padded_size_bytes")?;
    let expected_sha = meta
        .get("sha256")
        .and_then(|v| v.as_str())
        .ok_or_else(|| CliError::usage("metadata lacks sha256"))?;

    let code = ErasureCode::new(n, k)?;
    let layout = ObjectLayout::new(padded, k, symbol_size)?;
    let mut fragments: Vec<(u16, Vec<u8>)> = Vec::new();
    for efi in 0..n as u16 {
        let path = fragment_path(input, efi);
        match fs::read(&path) {
            Ok(bytes) => fragments.push((efi, bytes)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => continue,
            Err(e) => return Err(CliError::io("reading", &path, e)),
        }
        if fragments.len() == k as usize {
            break; // any k distinct fragments suffice
        }
    }
    if fragments.len() < k as usize {
        return Err(CliError::Runtime(format!(
            "only {} of the {k} required fragments survive in {}",
            fragments.len(),
            input.display()
        )));
    }
    let object = layout.reassemble(&fragments, &code)?;
    let restored = &object[..true_size as usize];
    let actual_sha = sha256_hex(restored);
    if actual_sha != expected_sha {
        return Err(CliError::Runtime(format!(
            "digest mismatch after decode: expected {expected_sha}, got {actual_sha}"
        )));
    }
    fs::write(output, restored).map_err(|e| CliError::io("writing", output, e))?;
    eprintln!("restored {} bytes, digest verified", true_size);
    Ok(())
}

fn plan_to_json(plan: &AccessPlan) -> serde_json::Value {
    let mode = match plan.mode {
        AccessMode::Liq { extra } => json!({ "kind": "liq", "extra": extra }),
        AccessMode::Sc => json!({ "kind": "sc" }),
        AccessMode::ScDeg => json!({ "kind": "sc_deg" }),
    };
    json!({
        "mode": mode,
        "requests": plan
            .requests
            .iter()
            .map(|r| json!({ "efi": r.efi, "offset": r.offset, "length": r.length }))
            .collect::<Vec<_>>(),
        "total_read": plan.total_read,
        "amplification": plan.amplification,
    })
}

#[allow(clippy::too_many_arguments)]
fn cmd_plan(
    object_size: u64,
    n: u32,
    k: u32,
    symbol_size: u32,
    offset: u64,
    length: u64,
    mode: &str,
    extra: u16,
    unavailable: &[u16],
) -> Result<(), CliError> {
    let layout = ObjectLayout::new(object_size, k, symbol_size)?;
    let mode = match mode {
        "liq" => AccessMode::Liq { extra },
        "sc" => AccessMode::Sc,
        "sc-deg" => AccessMode::ScDeg,
        other => return Err(CliError::usage(format!("unknown mode {other}"))),
    };
    if n > u16::MAX as u32 {
        return Err(CliError::usage("n exceeds the codec's u16 range"));
    }
    let mut available = vec![true; n as usize];
    for &efi in unavailable {
        *available
            .get_mut(efi as usize)
            .ok_or_else(|| CliError::usage(format!("unavailable EFI {efi} out of range")))? = false;
    }
    let plan = plan_chunk_access(offset, length, &layout, n as u16, mode, &available)
        .map_err(|e| CliError::usage(e.to_string()))?;
    print_stdout(&format!(
        "{}\n",
        serde_json::to_string_pretty(&plan_to_json(&plan)).expect("plan JSON")
    ))
}
