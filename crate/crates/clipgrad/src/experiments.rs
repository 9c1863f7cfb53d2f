//! Monte Carlo experiment harness.
//!
//! A declarative [`ExperimentConfig`] (TOML on disk) names a problem, a noise
//! oracle, a schedule, and a sweep grid. [`run_sweep`] executes one run per
//! (horizon, seed) pair in parallel, streams each finished record to a
//! partial file, and finalizes three artifacts in the output directory:
//!
//! * `results.csv` — one row per run, stable column order, floats with 17
//!   significant digits;
//! * `fits.json` — log–log convergence-rate fits of the aggregated error;
//! * `config_echo.json` — the exact configuration that produced the data.
//!
//! Output bytes depend only on the configuration content — never on worker
//! count, execution order, or wall-clock — because every run draws from its
//! own counter-derived RNG stream and records are sorted before writing.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write as _};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::linalg::{KahanSum, Norm};
use crate::noise::{NoiseOracle, NoiseSpec};
use crate::optimizer::{run_md, run_sgd, Averaging, Checkpoint, RunRecord};
use crate::problems::{Problem, ProblemSpec};
use crate::schedules::{Schedule, ScheduleKind, ScheduleSpec, WFamily};
use crate::{Error, Result};

/// Errors are clamped to this floor before taking logarithms, so noiseless
/// runs that land exactly on the minimizer cannot produce `ln 0`.
pub const ERROR_FLOOR: f64 = 1e-15;

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// Which optimization loop a sweep drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Projected subgradient descent with Euclidean clipping.
    Sgd,
    /// Entropic mirror descent on the simplex with max-norm clipping.
    Md,
}

impl Default for Method {
    fn default() -> Self {
        Method::Sgd
    }
}

/// The schedule section of a config file: the family plus its free knobs.
///
/// Quantities derivable from the rest of the experiment are wired
/// automatically and must not appear here: the subgradient bound comes from
/// the problem, the moment order and scale from the noise oracle, the
/// strong-convexity modulus from the objective, and the fixed-horizon
/// schedule's horizon from the sweep grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    /// Schedule family.
    pub kind: ScheduleKind,
    /// Clip scale `M ≥ 0` (`0` = clip at the constant `2G`).
    #[serde(default)]
    pub m: f64,
    /// Step scale, given directly.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Step scale in failure-probability form, `α = β/ln(4/δ)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    /// Failure probability (pairs with `beta`; required and standalone for
    /// the distance-adaptive kind).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// Movement floor (distance-adaptive kind only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    /// Weight family (distance-adaptive kind only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w_family: Option<WFamily>,
}

/// The sweep section: grid, replication, averaging, and output location.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Horizon grid, strictly increasing.
    pub horizons: Vec<u64>,
    /// Number of independent runs per horizon (≥ 1).
    pub replications: u64,
    /// First seed; runs use seeds `seed_start .. seed_start + replications`.
    #[serde(default)]
    pub seed_start: u64,
    /// Master seed; the run with seed `s` draws from the independent stream
    /// `s` of a generator keyed by this value.
    #[serde(default)]
    pub master_seed: u64,
    /// Averaging rule for the reported point.
    pub averaging: Averaging,
    /// Output directory for `results.csv`, `fits.json`, `config_echo.json`.
    pub output: String,
    /// Quantile levels reported in the fits (each in `[0, 1]`).
    #[serde(default = "default_quantiles")]
    pub quantiles: Vec<f64>,
}

fn default_quantiles() -> Vec<f64> {
    vec![0.5, 0.95]
}

/// One complete experiment: problem, noise, schedule, sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Which optimization loop to run (defaults to the subgradient method).
    #[serde(default)]
    pub method: Method,
    /// Objective and feasible set.
    pub problem: ProblemSpec,
    /// Gradient-noise oracle.
    pub noise: NoiseSpec,
    /// Step-size and clip-level schedule.
    pub schedule: ScheduleConfig,
    /// Grid, seeds, averaging, output.
    pub sweep: SweepSpec,
}

impl ExperimentConfig {
    /// Check the config invariants that do not require building the parts.
    pub fn validate(&self) -> Result<()> {
        let sweep = &self.sweep;
        if sweep.horizons.is_empty() {
            return Err(Error::invalid("sweep.horizons", "horizon grid must be nonempty"));
        }
        if sweep.horizons[0] == 0 {
            return Err(Error::invalid("sweep.horizons", "horizons must be ≥ 1"));
        }
        if !sweep.horizons.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::invalid(
                "sweep.horizons",
                "horizon grid must be strictly increasing",
            ));
        }
        if sweep.replications == 0 {
            return Err(Error::invalid("sweep.replications", "need at least one run per horizon"));
        }
        if sweep.seed_start.checked_add(sweep.replications).is_none() {
            return Err(Error::invalid("sweep.seed_start", "seed range overflows"));
        }
        if let Some(q) = sweep.quantiles.iter().find(|q| !(0.0..=1.0).contains(*q)) {
            return Err(Error::invalid(
                "sweep.quantiles",
                format!("quantile levels must lie in [0, 1], got {q}"),
            ));
        }
        if sweep.output.is_empty() {
            return Err(Error::invalid("sweep.output", "output directory must be named"));
        }
        if sweep.averaging == Averaging::RWeighted
            && self.schedule.kind != ScheduleKind::DistanceAdaptive
        {
            return Err(Error::invalid(
                "sweep.averaging",
                "movement-weighted averaging requires the distance-adaptive schedule",
            ));
        }
        if self.method == Method::Md
            && !matches!(
                self.schedule.kind,
                ScheduleKind::AnytimeConvex | ScheduleKind::FixedConvex
            )
        {
            return Err(Error::invalid(
                "schedule.kind",
                "mirror descent supports only the anytime and fixed-horizon convex schedules",
            ));
        }
        Ok(())
    }

    /// The seed list the sweep will use.
    pub fn seeds(&self) -> impl Iterator<Item = u64> + '_ {
        self.sweep.seed_start..self.sweep.seed_start + self.sweep.replications
    }
}

/// Load and validate a TOML experiment config.
///
/// Unknown keys are rejected; the parse error names the offending key and
/// its line in the file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    let config: ExperimentConfig = toml::from_str(&text)
        .map_err(|e| Error::ConfigParse(format!("{}: {e}", path.display())))?;
    config.validate()?;
    Ok(config)
}

/// 64-bit FNV-1a digest of the canonical (JSON) form of the config.
///
/// Stamped into every run record so each CSV row names the exact
/// configuration that produced it. The output directory is excluded: it
/// locates the artifacts but does not change what was run, so the same
/// experiment written to two places carries the same digest.
pub fn config_digest(config: &ExperimentConfig) -> u64 {
    let mut content = config.clone();
    content.sweep.output = String::new();
    let canonical = serde_json::to_string(&content).expect("config serialization cannot fail");
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in canonical.as_bytes() {
        hash ^= u64::from(*byte);
        hash = hash.wrapping_mul(0x1_0000_0000_01b3);
    }
    hash
}

/// Wire a runnable schedule for one horizon: the subgradient bound comes
/// from the problem (in the clipping norm of the method), the moment order
/// and noise scale from the oracle, and kind-specific fields from the config.
pub fn make_schedule(
    config: &ExperimentConfig,
    problem: &Problem,
    noise: &NoiseOracle,
    horizon: u64,
) -> Result<Schedule> {
    let norm = match config.method {
        Method::Sgd => Norm::L2,
        Method::Md => Norm::Linf,
    };
    let kind = config.schedule.kind;
    let spec = ScheduleSpec {
        kind,
        g: problem.lipschitz(norm),
        p: noise.p(),
        m: config.schedule.m,
        alpha: config.schedule.alpha,
        beta: config.schedule.beta,
        delta: config.schedule.delta,
        horizon: (kind == ScheduleKind::FixedConvex).then_some(horizon),
        mu: (kind == ScheduleKind::StronglyConvex).then(|| problem.strong_convexity()),
        sigma: (kind == ScheduleKind::DistanceAdaptive).then(|| noise.sigma()),
        r: config.schedule.r,
        w_family: config.schedule.w_family,
    };
    spec.build()
}

/// Execute the single run `(horizon, seed)` of a config and stamp its
/// identifiers. Deterministic: seed `s` always uses RNG stream `s` of the
/// master-seeded generator, independent of every other run.
pub fn run_one(
    config: &ExperimentConfig,
    problem: &Problem,
    noise: &NoiseOracle,
    horizon: u64,
    seed: u64,
) -> Result<RunRecord> {
    let schedule = make_schedule(config, problem, noise, horizon)?;
    let mut rng = ChaCha12Rng::seed_from_u64(config.sweep.master_seed);
    rng.set_stream(seed);
    let mut record = match config.method {
        Method::Sgd => run_sgd(
            problem,
            noise,
            &schedule,
            horizon,
            problem.start(),
            &mut rng,
            config.sweep.averaging,
        )?,
        Method::Md => run_md(
            problem,
            noise,
            &schedule,
            horizon,
            problem.start(),
            &mut rng,
            config.sweep.averaging,
        )?,
    };
    record.seed = seed;
    record.config_digest = config_digest(config);
    Ok(record)
}

// ---------------------------------------------------------------------------
// Rate fitting
// ---------------------------------------------------------------------------

/// How per-horizon errors are collapsed to one value before fitting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// The 0.5 order statistic (robust default for heavy-tailed errors).
    Median,
    /// Arithmetic mean (matches in-expectation statements; high variance).
    Mean,
    /// Order-statistic quantile with lower interpolation; requires ≥ 20
    /// replications per horizon.
    Quantile(f64),
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Aggregation::Median => write!(f, "median"),
            Aggregation::Mean => write!(f, "mean"),
            Aggregation::Quantile(q) => write!(f, "q{q}"),
        }
    }
}

/// An ordinary least-squares fit of `ln(aggregated error)` on `ln T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    /// How errors were aggregated per horizon.
    pub aggregation: Aggregation,
    /// Fitted exponent: error ~ `C·T^slope`.
    pub slope: f64,
    /// Fitted `ln C`.
    pub intercept: f64,
    /// Coefficient of determination in `[0, 1]` (1 when the aggregated
    /// errors are exactly constant).
    pub r_squared: f64,
    /// Number of horizons used after regime filtering.
    pub n_points: usize,
}

/// Constants for detecting which term of the two-regime error bound
/// dominates at a horizon: `g/√T` versus `m·T^((1−p)/p)`.
#[derive(Debug, Clone, Copy)]
pub struct RegimeParams {
    /// Subgradient bound.
    pub g: f64,
    /// Clip/noise scale multiplying the heavy-tail term.
    pub m: f64,
    /// Moment order.
    pub p: f64,
}

impl RegimeParams {
    fn g_term(&self, t: u64) -> f64 {
        self.g / (t as f64).sqrt()
    }
    fn m_term(&self, t: u64) -> f64 {
        self.m * (t as f64).powf((1.0 - self.p) / self.p)
    }
}

/// Lower-interpolation order statistic of a sorted slice: element at index
/// `⌊q·(n−1)⌋`.
fn order_stat(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let idx = (q * (sorted.len() - 1) as f64).floor() as usize;
    sorted[idx.min(sorted.len() - 1)]
}

/// Group the per-run errors by horizon (sorted ascending within each group).
fn errors_by_horizon(records: &[RunRecord]) -> BTreeMap<u64, Vec<f64>> {
    let mut by_t: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    for r in records {
        by_t.entry(r.t).or_default().push(r.final_error);
    }
    for errs in by_t.values_mut() {
        errs.sort_unstable_by(f64::total_cmp);
    }
    by_t
}

/// Fit the convergence exponent: OLS of `ln(aggregated final error)` against
/// `ln T` over the horizon grid.
///
/// Errors are floored at [`ERROR_FLOOR`] before the logarithm. When regime
/// constants are supplied, leading horizons where the `g/√T` term dominates
/// are dropped — as long as the largest horizon sits in the heavy-tail
/// regime and at least three points survive — so the fitted exponent
/// reflects a single regime of the two-term bound.
pub fn fit_rate(
    records: &[RunRecord],
    aggregation: Aggregation,
    regime: Option<&RegimeParams>,
) -> Result<RateFit> {
    if let Aggregation::Quantile(q) = aggregation {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::invalid(
                "aggregation",
                format!("quantile level must lie in [0, 1], got {q}"),
            ));
        }
    }
    let by_t = errors_by_horizon(records);
    if by_t.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "rate fitting needs at least 3 distinct horizons, got {}",
            by_t.len()
        )));
    }

    let mut points: Vec<(u64, f64)> = Vec::with_capacity(by_t.len());
    for (t, errs) in &by_t {
        let value = match aggregation {
            Aggregation::Median => order_stat(errs, 0.5),
            Aggregation::Mean => {
                let mut sum = KahanSum::default();
                for e in errs {
                    sum.add(*e);
                }
                sum.value() / errs.len() as f64
            }
            Aggregation::Quantile(q) => {
                if errs.len() < 20 {
                    return Err(Error::InsufficientData(format!(
                        "quantile aggregation needs ≥ 20 replications per horizon, \
                         got {} at T = {t}",
                        errs.len()
                    )));
                }
                order_stat(errs, q)
            }
        };
        if !value.is_finite() {
            return Err(Error::invalid(
                "records",
                format!("aggregated error at T = {t} is not finite"),
            ));
        }
        points.push((*t, value.max(ERROR_FLOOR)));
    }

    if let Some(params) = regime {
        // Drop leading horizons dominated by the g/√T term, provided the
        // grid's far end is in the heavy-tail regime and ≥ 3 points remain.
        while points.len() > 3 {
            let first = points[0].0;
            let last = points[points.len() - 1].0;
            let first_g_dominated = params.g_term(first) > params.m_term(first);
            let last_noise_dominated = params.m_term(last) >= params.g_term(last);
            if first_g_dominated && last_noise_dominated {
                points.remove(0);
            } else {
                break;
            }
        }
    }

    let xy: Vec<(f64, f64)> = points
        .iter()
        .map(|&(t, e)| ((t as f64).ln(), e.ln()))
        .collect();
    let (slope, intercept, r_squared) = ols(&xy);
    if !slope.is_finite() {
        return Err(Error::InsufficientData(
            "degenerate fit: horizons collapse in log space".into(),
        ));
    }
    Ok(RateFit {
        aggregation,
        slope,
        intercept,
        r_squared,
        n_points: points.len(),
    })
}

/// Plain least squares. Returns `(slope, intercept, r²)`; `r² = 1` when the
/// responses have zero variance (the fit is exact).
fn ols(points: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for &(x, y) in points {
        let dx = x - mean_x;
        let dy = y - mean_y;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        (1.0 - (syy - slope * sxy) / syy).clamp(0.0, 1.0)
    };
    (slope, intercept, r_squared)
}

/// Order-statistic quantile (lower interpolation) of the final error at each
/// horizon. Refuses horizons with fewer than 20 replications.
pub fn quantile_errors(records: &[RunRecord], q: f64) -> Result<BTreeMap<u64, f64>> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::invalid(
            "q",
            format!("quantile level must lie in [0, 1], got {q}"),
        ));
    }
    let by_t = errors_by_horizon(records);
    if by_t.is_empty() {
        return Err(Error::InsufficientData("no records to take quantiles of".into()));
    }
    let mut out = BTreeMap::new();
    for (t, errs) in &by_t {
        if errs.len() < 20 {
            return Err(Error::InsufficientData(format!(
                "quantiles need ≥ 20 replications per horizon, got {} at T = {t}",
                errs.len()
            )));
        }
        out.insert(*t, order_stat(errs, q));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Fit reports
// ---------------------------------------------------------------------------

/// A rate fit that could not be computed, and why.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedFit {
    /// The aggregation that was attempted.
    pub aggregation: Aggregation,
    /// Human-readable reason.
    pub reason: String,
}

/// All fits computed for one sweep: median and mean always attempted, then
/// one quantile fit per configured level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct FitReport {
    /// Successful fits, in a fixed order.
    pub fits: Vec<RateFit>,
    /// Aggregations that could not be fitted (e.g. too few horizons or
    /// replications), with reasons.
    pub skipped: Vec<SkippedFit>,
}

/// Build the fit report for a sweep's records.
pub fn fit_report(
    config: &ExperimentConfig,
    problem: &Problem,
    noise: &NoiseOracle,
    records: &[RunRecord],
) -> FitReport {
    let norm = match config.method {
        Method::Sgd => Norm::L2,
        Method::Md => Norm::Linf,
    };
    let m_scale = if config.schedule.kind == ScheduleKind::DistanceAdaptive {
        noise.sigma()
    } else {
        config.schedule.m
    };
    let regime = RegimeParams {
        g: problem.lipschitz(norm),
        m: m_scale,
        p: noise.p(),
    };

    let mut aggregations = vec![Aggregation::Median, Aggregation::Mean];
    aggregations.extend(config.sweep.quantiles.iter().map(|&q| Aggregation::Quantile(q)));

    let mut report = FitReport::default();
    for aggregation in aggregations {
        match fit_rate(records, aggregation, Some(&regime)) {
            Ok(fit) => report.fits.push(fit),
            Err(e) => report.skipped.push(SkippedFit {
                aggregation,
                reason: e.to_string(),
            }),
        }
    }
    report
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

/// JSON output with every float printed as `{:.16e}` (17 significant
/// digits), per the artifact contract.
struct SciFormatter;

impl serde_json::ser::Formatter for SciFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        write!(writer, "{value:.16e}")
    }
}

/// Serialize a value to compact JSON with every float carrying 17
/// significant digits (newline-terminated), the format of all JSON
/// artifacts this crate writes. Such floats parse back bit-exactly.
pub fn to_canonical_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SciFormatter);
    value
        .serialize(&mut ser)
        .map_err(|e| Error::ConfigParse(format!("JSON serialization failed: {e}")))?;
    buf.push(b'\n');
    Ok(buf)
}

/// The scalar CSV columns, in their stable order. Checkpoint columns
/// (`err_t_<k>`) follow, one per distinct checkpoint time across the records.
const CSV_SCALARS: [&str; 12] = [
    "t",
    "seed",
    "final_error",
    "full_average_error",
    "last_iterate_error",
    "last_iterate_dist_sq",
    "distance_max",
    "r_final",
    "selected_index",
    "seq_lhs",
    "seq_rhs",
    "config_digest",
];

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// Write `results.csv`, `fits.json`, and `config_echo.json` into `dir`.
///
/// The CSV holds one row per record in `(t, seed)` order with a header row;
/// all floats carry 17 significant digits, optional fields are empty when
/// absent, and the digest is hexadecimal. Vector-valued record fields (the
/// averaged point, the radius history) are not flattened into the CSV.
pub fn write_results(
    records: &[RunRecord],
    fits: &FitReport,
    config: &ExperimentConfig,
    dir: &Path,
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;

    // Checkpoint columns: the union of checkpoint times, ascending.
    let mut cp_times: Vec<u64> = records
        .iter()
        .flat_map(|r| r.checkpoints.iter().map(|c| c.t))
        .collect();
    cp_times.sort_unstable();
    cp_times.dedup();

    let mut sorted: Vec<&RunRecord> = records.iter().collect();
    sorted.sort_by_key(|r| (r.t, r.seed));

    let csv_path = dir.join("results.csv");
    let mut out = String::new();
    out.push_str(&CSV_SCALARS.join(","));
    for t in &cp_times {
        out.push_str(&format!(",err_t_{t}"));
    }
    out.push('\n');
    for r in sorted {
        let scalars = [
            r.t.to_string(),
            r.seed.to_string(),
            fmt_f64(r.final_error),
            fmt_opt(r.full_average_error),
            fmt_f64(r.last_iterate_error),
            fmt_f64(r.last_iterate_dist_sq),
            fmt_f64(r.distance_max),
            fmt_opt(r.r_final),
            r.selected_index.map(|i| i.to_string()).unwrap_or_default(),
            fmt_opt(r.seq_lhs),
            fmt_opt(r.seq_rhs),
            format!("{:016x}", r.config_digest),
        ];
        out.push_str(&scalars.join(","));
        let mut iter = r.checkpoints.iter().peekable();
        for t in &cp_times {
            out.push(',');
            if let Some(c) = iter.peek() {
                if c.t == *t {
                    out.push_str(&fmt_f64(c.error));
                    iter.next();
                }
            }
        }
        out.push('\n');
    }
    fs::write(&csv_path, out).map_err(|e| io_err(&csv_path, e))?;

    let fits_path = dir.join("fits.json");
    fs::write(&fits_path, to_canonical_json(fits)?).map_err(|e| io_err(&fits_path, e))?;

    let echo_path = dir.join("config_echo.json");
    fs::write(&echo_path, to_canonical_json(config)?).map_err(|e| io_err(&echo_path, e))?;
    Ok(())
}

/// Read a `results.csv` back into run records.
///
/// Only the scalar and checkpoint columns exist in the CSV, so the returned
/// records carry an empty averaged point and no radius history; every field
/// used by [`fit_rate`] and [`quantile_errors`] round-trips exactly.
pub fn read_results_csv(path: &Path) -> Result<Vec<RunRecord>> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let bad = |line: usize, what: String| {
        Error::ConfigParse(format!("{}: line {}: {what}", path.display(), line))
    };
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| bad(1, "empty results file".into()))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < CSV_SCALARS.len() || cols[..CSV_SCALARS.len()] != CSV_SCALARS {
        return Err(bad(1, "unrecognized results header".into()));
    }
    let cp_times: Vec<u64> = cols[CSV_SCALARS.len()..]
        .iter()
        .map(|c| {
            c.strip_prefix("err_t_")
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| bad(1, format!("unrecognized column {c}")))
        })
        .collect::<Result<_>>()?;

    let mut records = Vec::new();
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != cols.len() {
            return Err(bad(
                lineno,
                format!("expected {} cells, got {}", cols.len(), cells.len()),
            ));
        }
        let f = |i: usize| -> Result<f64> {
            cells[i]
                .parse()
                .map_err(|_| bad(lineno, format!("bad float in column {}", cols[i])))
        };
        let opt_f = |i: usize| -> Result<Option<f64>> {
            if cells[i].is_empty() {
                Ok(None)
            } else {
                f(i).map(Some)
            }
        };
        let mut checkpoints = Vec::new();
        for (k, t) in cp_times.iter().enumerate() {
            let cell = cells[CSV_SCALARS.len() + k];
            if !cell.is_empty() {
                checkpoints.push(Checkpoint {
                    t: *t,
                    error: cell
                        .parse()
                        .map_err(|_| bad(lineno, format!("bad float in column err_t_{t}")))?,
                });
            }
        }
        records.push(RunRecord {
            t: cells[0]
                .parse()
                .map_err(|_| bad(lineno, "bad integer in column t".into()))?,
            seed: cells[1]
                .parse()
                .map_err(|_| bad(lineno, "bad integer in column seed".into()))?,
            final_error: f(2)?,
            full_average_error: opt_f(3)?,
            last_iterate_error: f(4)?,
            last_iterate_dist_sq: f(5)?,
            distance_max: f(6)?,
            r_final: opt_f(7)?,
            selected_index: if cells[8].is_empty() {
                None
            } else {
                Some(
                    cells[8]
                        .parse()
                        .map_err(|_| bad(lineno, "bad integer in column selected_index".into()))?,
                )
            },
            seq_lhs: opt_f(9)?,
            seq_rhs: opt_f(10)?,
            config_digest: u64::from_str_radix(cells[11], 16)
                .map_err(|_| bad(lineno, "bad digest in column config_digest".into()))?,
            final_average: Vec::new(),
            r_history: None,
            checkpoints,
        });
    }
    Ok(records)
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

/// Run every `(horizon, seed)` pair of the config and persist the artifacts.
///
/// Runs fan out across the current thread pool. Each finished record is
/// appended (JSON lines, completion order) to `results.partial.jsonl` in the
/// output directory; on success the final sorted artifacts are written and
/// the partial file is removed, so its presence marks an aborted sweep.
/// The final artifacts are byte-identical for any worker count.
pub fn run_sweep(config: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    config.validate()?;
    let problem = config.problem.build()?;
    let noise = config.noise.build(problem.dim())?;
    // Surface schedule-wiring errors before spawning any work.
    for &t in &config.sweep.horizons {
        make_schedule(config, &problem, &noise, t)?;
    }

    let out_dir = PathBuf::from(&config.sweep.output);
    fs::create_dir_all(&out_dir).map_err(|e| io_err(&out_dir, e))?;
    let partial_path = out_dir.join("results.partial.jsonl");
    let partial = Mutex::new(BufWriter::new(
        fs::File::create(&partial_path).map_err(|e| io_err(&partial_path, e))?,
    ));

    let jobs: Vec<(u64, u64)> = config
        .sweep
        .horizons
        .iter()
        .flat_map(|&t| config.seeds().map(move |s| (t, s)))
        .collect();

    let records: Result<Vec<RunRecord>> = jobs
        .par_iter()
        .map(|&(horizon, seed)| {
            let record = run_one(config, &problem, &noise, horizon, seed)?;
            let line = serde_json::to_string(&record)
                .map_err(|e| Error::ConfigParse(format!("record serialization failed: {e}")))?;
            {
                let mut writer = partial.lock().expect("partial-results writer poisoned");
                writeln!(writer, "{line}").map_err(|e| io_err(&partial_path, e))?;
            }
            Ok(record)
        })
        .collect();
    let mut records = records?;
    partial
        .lock()
        .expect("partial-results writer poisoned")
        .flush()
        .map_err(|e| io_err(&partial_path, e))?;

    records.sort_by_key(|r| (r.t, r.seed));
    let fits = fit_report(config, &problem, &noise, &records);
    write_results(&records, &fits, config, &out_dir)?;
    fs::remove_file(&partial_path).map_err(|e| io_err(&partial_path, e))?;
    Ok(records)
}

// ---------------------------------------------------------------------------
