//! `clipgrad` — command-line front end for the clipgrad library.
//!
//! Subcommands:
//!
//! * `run` — execute one optimization run from a config file; prints a
//!   one-line summary and writes the full run record as JSON.
//! * `sweep` — execute a full (horizon × seed) Monte Carlo sweep; writes
//!   `results.csv`, `fits.json`, and `config_echo.json`.
//! * `fit-rate` — refit convergence-rate exponents from an existing
//!   `results.csv`.
//! * `verify-clip` — Monte Carlo verification of the clipping-error bounds
//!   over a parameter grid.
//! * `calibrate-noise` — compare analytic and empirical truncated moments of
//!   a noise oracle.
//! * `schedule-audit` — scan a schedule's invariants (step–clip product,
//!   clip floor, monotonicity) over an iteration range.
//!
//! Exit codes: `0` success; `1` validation error (the message on standard
//! error names the offending field or path); `2` runtime failure. Flags
//! override config-file values, and the effective config is echoed next to
//! every artifact so outputs are reproducible from the echo alone. Relative
//! output directories resolve under `$CLIPGRAD_OUT` when that variable is
//! set.

use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};

use clipgrad::clip::verify_clip_bounds;
use clipgrad::experiments::{
    config_digest, fit_rate, fit_report, load_config, run_one, run_sweep, to_canonical_json,
    Aggregation, ExperimentConfig, RateFit, RegimeParams,
};
use clipgrad::linalg::Norm;
use clipgrad::noise::{empirical_truncated_moment, NoiseFamily, NoiseSpec};
use clipgrad::problems::{FeasibleKind, FeasibleSpec, ProblemKind, ProblemSpec, VectorSpec};
use clipgrad::schedules::{ScheduleKind, ScheduleSpec, WFamily};

/// Name of the environment variable holding the default output base
/// directory. Relative output paths are resolved beneath it when set.
const OUT_ENV: &str = "CLIPGRAD_OUT";

// ---------------------------------------------------------------------------
// Argument definitions
// ---------------------------------------------------------------------------

#[derive(Parser)]
#[command(
    name = "clipgrad",
    version,
    about = "Clipped stochastic subgradient methods under heavy-tailed gradient noise",
    propagate_version = true
)]
struct Cli {
    /// Worker threads for parallel sections [default: all cores]
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,

    /// Print extra detail (per-run lines for sweeps, checkpoints for runs)
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a single run of a configured experiment
    Run(RunArgs),
    /// Execute the full (horizon × seed) sweep of a configured experiment
    Sweep(SweepArgs),
    /// Fit a convergence-rate exponent from an existing results.csv
    FitRate(FitRateArgs),
    /// Verify the clipping-error bounds by Monte Carlo over a grid
    VerifyClip(VerifyClipArgs),
    /// Compare analytic and empirical truncated moments of a noise oracle
    CalibrateNoise(CalibrateNoiseArgs),
    /// Scan a schedule's step/clip invariants over an iteration range
    ScheduleAudit(ScheduleAuditArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config file (TOML)
    #[arg(long, value_name = "PATH")]
    config: PathBuf,

    /// Horizon T [default: the largest horizon in the config grid]
    #[arg(long, value_name = "T")]
    horizon: Option<u64>,

    /// Run seed [default: the config's sweep.seed_start]
    #[arg(long, value_name = "S")]
    seed: Option<u64>,

    /// Master seed override [default: the config's sweep.master_seed]
    #[arg(long, value_name = "SEED")]
    master_seed: Option<u64>,

    /// Output directory override [default: the config's sweep.output]
    #[arg(long, value_name = "DIR")]
    output: Option<String>,
}

#[derive(Args)]
struct SweepArgs {
    /// Experiment config file (TOML)
    #[arg(long, value_name = "PATH")]
    config: PathBuf,

    /// Master seed override [default: the config's sweep.master_seed]
    #[arg(long, value_name = "SEED")]
    master_seed: Option<u64>,

    /// First seed override [default: the config's sweep.seed_start]
    #[arg(long, value_name = "S")]
    seed_start: Option<u64>,

    /// Replications-per-horizon override [default: the config's value]
    #[arg(long, value_name = "R")]
    replications: Option<u64>,

    /// Output directory override [default: the config's sweep.output]
    #[arg(long, value_name = "DIR")]
    output: Option<String>,
}

#[derive(Args)]
struct FitRateArgs {
    /// results.csv produced by `sweep`
    #[arg(long, value_name = "PATH")]
    results: PathBuf,

    /// Aggregation per horizon: `median`, `mean`, or a quantile level in [0, 1]
    #[arg(long, default_value = "median", value_name = "AGG")]
    aggregation: String,

    /// Subgradient bound for regime filtering (give --G, --M, --p together)
    #[arg(long = "G", value_name = "G")]
    g: Option<f64>,

    /// Clip/noise scale for regime filtering
    #[arg(long = "M", value_name = "M")]
    m: Option<f64>,

    /// Moment order for regime filtering
    #[arg(long, value_name = "P")]
    p: Option<f64>,
}

#[derive(Args)]
struct VerifyClipArgs {
    /// Moment order(s) in (1, 2], comma-separated for a grid
    #[arg(long, value_delimiter = ',', required = true, value_name = "P")]
    p: Vec<f64>,

    /// Noise scale(s) σ ≥ 0, comma-separated for a grid
    #[arg(long, value_delimiter = ',', required = true, value_name = "SIGMA")]
    sigma: Vec<f64>,

    /// Subgradient bound G of the cone test objective
    #[arg(long = "G", default_value_t = 1.0, value_name = "G")]
    g: f64,

    /// Clip level(s), each ≥ 2G, comma-separated for a grid
    #[arg(long = "M", value_delimiter = ',', required = true, value_name = "M")]
    m: Vec<f64>,

    /// Monte Carlo samples per grid point
    #[arg(long = "N", default_value_t = 1_000_000, value_name = "N")]
    n: u64,

    /// Pareto tail index a > p [default: p + 0.25]
    #[arg(long, value_name = "A")]
    shape: Option<f64>,

    /// Dimension of the test problem
    #[arg(long, default_value_t = 10, value_name = "D")]
    dim: usize,

    /// Norm for clipping and noise calibration
    #[arg(long, value_enum, default_value_t = NormArg::L2)]
    norm: NormArg,

    /// RNG seed (the sample budget is sharded deterministically)
    #[arg(long, default_value_t = 0, value_name = "SEED")]
    seed: u64,
}

#[derive(Args)]
struct CalibrateNoiseArgs {
    /// Noise family
    #[arg(long, value_enum, default_value_t = FamilyArg::SpherePareto)]
    family: FamilyArg,

    /// Moment order p in (1, 2]
    #[arg(long, value_name = "P")]
    p: f64,

    /// Noise scale σ ≥ 0 (calibrated so E‖ξ‖ᵖ = σᵖ)
    #[arg(long, value_name = "SIGMA")]
    sigma: f64,

    /// Pareto tail index a > p (sphere_pareto only) [default: p + 0.25]
    #[arg(long, value_name = "A")]
    shape: Option<f64>,

    /// Noise dimension
    #[arg(long, default_value_t = 10, value_name = "D")]
    dim: usize,

    /// Calibration norm
    #[arg(long, value_enum, default_value_t = NormArg::L2)]
    norm: NormArg,

    /// Truncation threshold as a multiple of the magnitude scale s
    #[arg(long, default_value_t = 100.0, value_name = "K")]
    k_mult: f64,

    /// Monte Carlo samples
    #[arg(long = "N", default_value_t = 1_000_000, value_name = "N")]
    n: u64,

    /// RNG seed (the sample budget is sharded deterministically)
    #[arg(long, default_value_t = 0, value_name = "SEED")]
    seed: u64,
}

#[derive(Args)]
struct ScheduleAuditArgs {
    /// Schedule family
    #[arg(long, value_enum)]
    kind: KindArg,

    /// Subgradient bound G > 0
    #[arg(long = "G", value_name = "G")]
    g: f64,

    /// Moment order p in (1, 2]
    #[arg(long, value_name = "P")]
    p: f64,

    /// Clip scale M ≥ 0 (0 = clip at the constant 2G)
    #[arg(long = "M", default_value_t = 0.0, value_name = "M")]
    m: f64,

    /// Step scale α (convex kinds; exclusive with --beta)
    #[arg(long, value_name = "ALPHA")]
    alpha: Option<f64>,

    /// Step scale β with α = β/ln(4/δ) (convex kinds; needs --delta)
    #[arg(long, value_name = "BETA")]
    beta: Option<f64>,

    /// Failure probability δ in (0, 1)
    #[arg(long, value_name = "DELTA")]
    delta: Option<f64>,

    /// Horizon T (fixed_convex only)
    #[arg(long, value_name = "T")]
    horizon: Option<u64>,

    /// Strong-convexity modulus μ > 0 (strongly_convex only)
    #[arg(long, value_name = "MU")]
    mu: Option<f64>,

    /// Noise scale σ ≥ 0 (distance_adaptive only)
    #[arg(long, value_name = "SIGMA")]
    sigma: Option<f64>,

    /// Movement floor r > 0 (distance_adaptive only)
    #[arg(long, value_name = "R")]
    r: Option<f64>,

    /// Weight family (distance_adaptive only)
    #[arg(long, value_enum, value_name = "FAMILY")]
    w_family: Option<WFamilyArg>,

    /// Iterated-log factor count n (with --w-family iterated_log)
    #[arg(long, default_value_t = 1, value_name = "N")]
    w_n: u32,

    /// Iterated-log exponent margin ε > 0 (with --w-family iterated_log)
    #[arg(long, default_value_t = 1.0, value_name = "EPS")]
    w_eps: f64,

    /// Upper end of the scan (from t = 1)
    #[arg(long, default_value_t = 1_000_000, value_name = "T")]
    max_t: u64,

    /// Iterations to echo as sample rows [default: powers of 10 plus max-t]
    #[arg(long, value_delimiter = ',', value_name = "T,...")]
    rows: Vec<u64>,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum NormArg {
    /// Euclidean norm
    #[value(name = "l2")]
    L2,
    /// Maximum norm (the simplex geometry's dual)
    #[value(name = "linf")]
    Linf,
}

impl From<NormArg> for Norm {
    fn from(v: NormArg) -> Norm {
        match v {
            NormArg::L2 => Norm::L2,
            NormArg::Linf => Norm::Linf,
        }
    }
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum FamilyArg {
    /// No noise (exact subgradients)
    #[value(name = "zero")]
    Zero,
    /// Isotropic Gaussian (finite variance, p = 2)
    #[value(name = "gaussian")]
    Gaussian,
    /// Uniform direction with Pareto magnitude (heavy-tailed)
    #[value(name = "sphere_pareto")]
    SpherePareto,
}

impl From<FamilyArg> for NoiseFamily {
    fn from(v: FamilyArg) -> NoiseFamily {
        match v {
            FamilyArg::Zero => NoiseFamily::Zero,
            FamilyArg::Gaussian => NoiseFamily::Gaussian,
            FamilyArg::SpherePareto => NoiseFamily::SpherePareto,
        }
    }
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum KindArg {
    /// Horizon-free convex schedule
    #[value(name = "anytime_convex")]
    AnytimeConvex,
    /// Fixed-horizon convex schedule (constant step and clip level)
    #[value(name = "fixed_convex")]
    FixedConvex,
    /// Strongly convex schedule with step 4/(μ(t+1))
    #[value(name = "strongly_convex")]
    StronglyConvex,
    /// Distance-adaptive schedule (no initial-distance tuning)
    #[value(name = "distance_adaptive")]
    DistanceAdaptive,
}

impl From<KindArg> for ScheduleKind {
    fn from(v: KindArg) -> ScheduleKind {
        match v {
            KindArg::AnytimeConvex => ScheduleKind::AnytimeConvex,
            KindArg::FixedConvex => ScheduleKind::FixedConvex,
            KindArg::StronglyConvex => ScheduleKind::StronglyConvex,
            KindArg::DistanceAdaptive => ScheduleKind::DistanceAdaptive,
        }
    }
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum WFamilyArg {
    /// w_t = 1 + (ln t)²
    #[value(name = "log_squared")]
    LogSquared,
    /// Iterated-logarithm weights (see --w-n, --w-eps)
    #[value(name = "iterated_log")]
    IteratedLog,
}

// ---------------------------------------------------------------------------
// Failure plumbing
// ---------------------------------------------------------------------------

/// A CLI failure carrying its exit code: 1 validation, 2 runtime.
struct Failure {
    code: u8,
    message: String,
}

fn validation(message: impl Display) -> Failure {
    Failure {
        code: 1,
        message: message.to_string(),
    }
}

fn runtime(message: impl Display) -> Failure {
    Failure {
        code: 2,
        message: message.to_string(),
    }
}

/// Library errors map to exit codes by kind: I/O trouble is a runtime
/// failure, everything else (parameters, config, data sufficiency) is a
/// validation failure whose message names the field.
fn classify(e: clipgrad::Error) -> Failure {
    match &e {
        clipgrad::Error::Io { .. } => runtime(e),
        _ => validation(e),
    }
}

type CliResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version surface here; keep their exit code 0.
            let code = u8::from(e.use_stderr());
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            eprintln!("error: invalid `--jobs`: need at least one worker thread");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
        {
            eprintln!("error: could not configure {jobs} worker threads: {e}");
            return ExitCode::from(2);
        }
    }
    let verbose = cli.verbose > 0;
    let result = match cli.command {
        Command::Run(args) => cmd_run(args, verbose),
        Command::Sweep(args) => cmd_sweep(args, verbose),
        Command::FitRate(args) => cmd_fit_rate(args),
        Command::VerifyClip(args) => cmd_verify_clip(args),
        Command::CalibrateNoise(args) => cmd_calibrate_noise(args),
        Command::ScheduleAudit(args) => cmd_schedule_audit(args, verbose),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

// ---------------------------------------------------------------------------
// Shared helpers
// ---------------------------------------------------------------------------

/// Load a config file, with a missing path reported as a validation error.
fn load_checked(path: &Path) -> Result<ExperimentConfig, Failure> {
    if !path.is_file() {
        return Err(validation(format!(
            "config path `{}` does not exist",
            path.display()
        )));
    }
    load_config(path).map_err(classify)
}

/// Apply the output-directory resolution rules: an explicit flag beats the
/// config value, and a relative result is resolved under `$CLIPGRAD_OUT`
/// when that variable is set.
fn resolve_output(flag: Option<String>, config_value: &str) -> String {
    let chosen = flag.unwrap_or_else(|| config_value.to_string());
    match std::env::var_os(OUT_ENV) {
        Some(base) if !chosen.is_empty() && !Path::new(&chosen).is_absolute() => {
            Path::new(&base).join(&chosen).display().to_string()
        }
        _ => chosen,
    }
}

fn write_bytes(path: &Path, bytes: &[u8]) -> CliResult {
    fs::write(path, bytes)
        .map_err(|e| runtime(format!("could not write `{}`: {e}", path.display())))
}

fn fit_line(fit: &RateFit) -> String {
    format!(
        "fit {:<7} slope={:+.4} intercept={:+.4} r2={:.4} n={}",
        fit.aggregation.to_string(),
        fit.slope,
        fit.intercept,
        fit.r_squared,
        fit.n_points
    )
}

// ---------------------------------------------------------------------------
// run
// ---------------------------------------------------------------------------

fn cmd_run(args: RunArgs, verbose: bool) -> CliResult {
    let mut config = load_checked(&args.config)?;
    if let Some(ms) = args.master_seed {
        config.sweep.master_seed = ms;
    }
    let horizon = args
        .horizon
        .unwrap_or_else(|| *config.sweep.horizons.last().expect("validated nonempty"));
    let seed = args.seed.unwrap_or(config.sweep.seed_start);
    // The effective config of a single run is the 1×1 sweep it is.
    config.sweep.horizons = vec![horizon];
    config.sweep.seed_start = seed;
    config.sweep.replications = 1;
    config.sweep.output = resolve_output(args.output, &config.sweep.output);
    config.validate().map_err(classify)?;

    let problem = config.problem.build().map_err(classify)?;
    let noise = config.noise.build(problem.dim()).map_err(classify)?;
    let started = Instant::now();
    let record = run_one(&config, &problem, &noise, horizon, seed).map_err(classify)?;
    let elapsed = started.elapsed().as_secs_f64();

    let out_dir = PathBuf::from(&config.sweep.output);
    fs::create_dir_all(&out_dir)
        .map_err(|e| runtime(format!("could not create `{}`: {e}", out_dir.display())))?;
    let record_path = out_dir.join(format!("run_t{horizon}_seed{seed}.json"));
    write_bytes(&record_path, &to_canonical_json(&record).map_err(classify)?)?;
    write_bytes(
        &out_dir.join("config_echo.json"),
        &to_canonical_json(&config).map_err(classify)?,
    )?;

    println!(
        "T={horizon} final_error={:.6e} elapsed={elapsed:.3}s",
        record.final_error
    );
    if verbose {
        for c in &record.checkpoints {
            println!("checkpoint t={} error={:.6e}", c.t, c.error);
        }
        if let (Some(r), Some(i)) = (record.r_final, record.selected_index) {
            println!("r_final={r:.6e} selected_index={i}");
        }
        println!("record written to {}", record_path.display());
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

fn cmd_sweep(args: SweepArgs, verbose: bool) -> CliResult {
    let mut config = load_checked(&args.config)?;
    if let Some(ms) = args.master_seed {
        config.sweep.master_seed = ms;
    }
    if let Some(s) = args.seed_start {
        config.sweep.seed_start = s;
    }
    if let Some(r) = args.replications {
        config.sweep.replications = r;
    }
    config.sweep.output = resolve_output(args.output, &config.sweep.output);
    config.validate().map_err(classify)?;

    let started = Instant::now();
    let records = run_sweep(&config).map_err(classify)?;
    let elapsed = started.elapsed().as_secs_f64();

    if verbose {
        for r in &records {
            println!("t={} seed={} final_error={:.6e}", r.t, r.seed, r.final_error);
        }
    }
    println!(
        "sweep complete: {} runs in {elapsed:.3}s -> {} (digest {:016x})",
        records.len(),
        config.sweep.output,
        config_digest(&config)
    );
    // Recompute the fit report for display; the persisted fits.json was
    // produced from the same records.
    let problem = config.problem.build().map_err(classify)?;
    let noise = config.noise.build(problem.dim()).map_err(classify)?;
    let report = fit_report(&config, &problem, &noise, &records);
    for fit in &report.fits {
        println!("{}", fit_line(fit));
    }
    for s in &report.skipped {
        println!("fit {:<7} skipped: {}", s.aggregation.to_string(), s.reason);
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// fit-rate
// ---------------------------------------------------------------------------

fn cmd_fit_rate(args: FitRateArgs) -> CliResult {
    if !args.results.is_file() {
        return Err(validation(format!(
            "results path `{}` does not exist",
            args.results.display()
        )));
    }
    let aggregation = match args.aggregation.as_str() {
        "median" => Aggregation::Median,
        "mean" => Aggregation::Mean,
        other => match other.parse::<f64>() {
            Ok(q) => Aggregation::Quantile(q),
            Err(_) => {
                return Err(validation(format!(
                    "invalid `--aggregation`: expected `median`, `mean`, or a \
                     quantile level in [0, 1], got `{other}`"
                )))
            }
        },
    };
    let regime = match (args.g, args.m, args.p) {
        (None, None, None) => None,
        (Some(g), Some(m), Some(p)) => Some(RegimeParams { g, m, p }),
        _ => {
            return Err(validation(
                "regime filtering needs `--G`, `--M`, and `--p` together (or none of them)",
            ))
        }
    };
    let records = clipgrad::experiments::read_results_csv(&args.results).map_err(classify)?;
    let fit = fit_rate(&records, aggregation, regime.as_ref()).map_err(classify)?;
    let json = to_canonical_json(&fit).map_err(classify)?;
    print!("{}", String::from_utf8(json).expect("canonical JSON is UTF-8"));
    Ok(())
}

// ---------------------------------------------------------------------------
// verify-clip
// ---------------------------------------------------------------------------

fn cmd_verify_clip(args: VerifyClipArgs) -> CliResult {
    if !(args.g > 0.0) || !args.g.is_finite() {
        return Err(validation(format!(
            "invalid `--G`: subgradient bound must be positive and finite, got {}",
            args.g
        )));
    }
    // The test bed: a cone objective with subgradient norm exactly G away
    // from its apex, evaluated at a point safely inside a ball.
    let problem = ProblemSpec {
        kind: ProblemKind::Cone,
        dim: args.dim,
        lipschitz: Some(args.g),
        apex: None,
        strong_convexity: None,
        center: None,
        costs: None,
        feasible: FeasibleSpec {
            kind: FeasibleKind::Ball,
            center: None,
            radius: Some(10.0),
        },
        start: Some(VectorSpec::ScaledUnit {
            axis: 0,
            scale: 5.0,
        }),
    }
    .build()
    .map_err(classify)?;

    println!("p,sigma,m,check,observed,bound,cushion,pass");
    let mut all_pass = true;
    for &p in &args.p {
        for &sigma in &args.sigma {
            let spec = NoiseSpec {
                family: if sigma == 0.0 {
                    NoiseFamily::Zero
                } else {
                    NoiseFamily::SpherePareto
                },
                p,
                sigma,
                norm: args.norm.into(),
                shape: (sigma != 0.0).then(|| args.shape.unwrap_or(p + 0.25)),
            };
            let noise = spec.build(args.dim).map_err(classify)?;
            for &m in &args.m {
                let check =
                    verify_clip_bounds(&problem, &noise, problem.start(), m, args.n, args.seed)
                        .map_err(classify)?;
                for c in &check.checks {
                    println!(
                        "{p},{sigma},{m},{},{:.16e},{:.16e},{:.16e},{}",
                        c.label, c.observed, c.bound, c.cushion, c.pass
                    );
                }
                all_pass &= check.pass;
            }
        }
    }
    if all_pass {
        Ok(())
    } else {
        Err(runtime("one or more clipping-error bounds failed"))
    }
}

// ---------------------------------------------------------------------------
// calibrate-noise
// ---------------------------------------------------------------------------

fn cmd_calibrate_noise(args: CalibrateNoiseArgs) -> CliResult {
    if !(args.k_mult > 0.0) || !args.k_mult.is_finite() {
        return Err(validation(format!(
            "invalid `--k-mult`: truncation multiple must be positive and finite, got {}",
            args.k_mult
        )));
    }
    let spec = NoiseSpec {
        family: args.family.into(),
        p: args.p,
        sigma: args.sigma,
        norm: args.norm.into(),
        shape: args.shape,
    };
    let noise = spec.build(args.dim).map_err(classify)?;
    let scale = noise.magnitude_scale().unwrap_or(1.0);
    let k = args.k_mult * scale;
    let analytic = noise.truncated_moment_p(k).map_err(classify)?;
    let empirical = empirical_truncated_moment(&noise, k, args.n, args.seed).map_err(classify)?;
    let abs_err = (empirical - analytic).abs();

    let fam = match args.family {
        FamilyArg::Zero => "zero",
        FamilyArg::Gaussian => "gaussian",
        FamilyArg::SpherePareto => "sphere_pareto",
    };
    let norm = match args.norm {
        NormArg::L2 => "l2",
        NormArg::Linf => "linf",
    };
    println!("family            {fam}");
    println!("p                 {}", args.p);
    println!("sigma             {}", args.sigma);
    if let Some(a) = args.shape.or_else(|| match args.family {
        FamilyArg::SpherePareto => Some(args.p + 0.25),
        _ => None,
    }) {
        println!("shape             {a}");
    }
    println!("dim               {}", args.dim);
    println!("norm              {norm}");
    println!("magnitude_scale   {scale:.16e}");
    println!("full_moment       {:.16e}", noise.moment_p());
    println!("truncation_k      {k:.16e}");
    println!("analytic          {analytic:.16e}");
    println!("empirical         {empirical:.16e}");
    println!("absolute_error    {abs_err:.16e}");
    if analytic != 0.0 {
        println!("relative_error    {:.16e}", abs_err / analytic.abs());
    } else {
        println!("relative_error    n/a (analytic moment is zero)");
    }
    println!("samples           {}", args.n);
    println!("seed              {}", args.seed);
    Ok(())
}

// ---------------------------------------------------------------------------
// schedule-audit
// ---------------------------------------------------------------------------

fn cmd_schedule_audit(args: ScheduleAuditArgs, verbose: bool) -> CliResult {
    let w_family = args.w_family.map(|w| match w {
        WFamilyArg::LogSquared => WFamily::LogSquared,
        WFamilyArg::IteratedLog => WFamily::IteratedLog {
            n: args.w_n,
            eps: args.w_eps,
        },
    });
    let schedule = ScheduleSpec {
        kind: args.kind.into(),
        g: args.g,
        p: args.p,
        m: args.m,
        alpha: args.alpha,
        beta: args.beta,
        delta: args.delta,
        horizon: args.horizon,
        mu: args.mu,
        sigma: args.sigma,
        r: args.r,
        w_family,
    }
    .build()
    .map_err(classify)?;

    let rows: Vec<u64> = if args.rows.is_empty() {
        let mut rows = Vec::new();
        let mut t = 1u64;
        while t <= args.max_t {
            rows.push(t);
            t = t.saturating_mul(10);
        }
        if rows.last() != Some(&args.max_t) {
            rows.push(args.max_t);
        }
        rows
    } else {
        args.rows.clone()
    };

    let report = schedule.audit(args.max_t, &rows);
    let yesno = |ok: bool| if ok { "ok" } else { "VIOLATED" };
    let kind_name = match report.kind {
        ScheduleKind::AnytimeConvex => "anytime_convex",
        ScheduleKind::FixedConvex => "fixed_convex",
        ScheduleKind::StronglyConvex => "strongly_convex",
        ScheduleKind::DistanceAdaptive => "distance_adaptive",
    };
    println!("kind              {kind_name}");
    println!("checked_to        {}", report.checked_to);
    match report.step_bound_ok {
        Some(ok) => println!("step_bound        {} (step*M_t <= step scale)", yesno(ok)),
        None => println!("step_bound        n/a (this kind has no step-scale bound)"),
    }
    println!("clip_floor        {} (M_t >= 2G)", yesno(report.floor_ok));
    println!("step_monotone     {}", yesno(report.step_monotone_ok));
    println!("clip_monotone     {}", yesno(report.clip_monotone_ok));
    println!(
        "max_step_clip     {:.10e} at t={}",
        report.max_step_clip, report.argmax_step_clip
    );
    match report.first_violation {
        Some(t) => println!("first_violation   t={t}"),
        None => println!("first_violation   none"),
    }
    if verbose {
        println!("rows (t, step, clip, step*clip):");
        for row in &report.rows {
            println!(
                "  {:<10} {:.10e}  {:.10e}  {:.10e}",
                row.t, row.step, row.clip, row.step_clip_product
            );
        }
    }
    if report.pass() {
        println!("status            pass");
        Ok(())
    } else {
        println!("status            fail");
        Err(runtime(match report.first_violation {
            Some(t) => format!("schedule audit failed, first violation at t = {t}"),
            None => "schedule audit failed".to_string(),
        }))
    }
}
