//! Acceptance suite: one test per shipped acceptance criterion.
//!
//! Each test loads the relevant shipped recipe from `configs/`, runs it (or
//! a documented variation of it), checks the criterion against the pinned
//! tolerances below, and prints a one-line `criterion NN <label>: PASS`
//! summary with the measured quantities (visible under `--nocapture`; the
//! test name itself carries the pass/fail verdict either way).
//!
//! Heavy tests serialize on a shared lock so that wall-clock budgets and
//! the thread-pool comparisons measure one workload at a time.

use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use clipgrad::clip::verify_clip_bounds;
use clipgrad::experiments::{
    config_digest, fit_rate, load_config, run_one, run_sweep, to_canonical_json, Aggregation,
    ExperimentConfig, RegimeParams,
};
use clipgrad::linalg::{dist_l2, dist_sq, KahanSum, Norm, VectorAverage};
use clipgrad::noise::{empirical_truncated_moment, NoiseFamily, NoiseSpec};
use clipgrad::optimizer::{run_sgd, select_index, sequence_bound_rhs, Averaging};
use clipgrad::problems::{
    mirror_step_simplex, FeasibleKind, FeasibleSpec, ProblemKind, ProblemSpec, VectorSpec,
};
use clipgrad::schedules::{ScheduleKind, ScheduleSpec, WFamily};

// ---------------------------------------------------------------------------
// Pinned tolerances
// ---------------------------------------------------------------------------

/// Criterion 1: max relative error between empirical and analytic truncated
/// moments at 10⁶ samples, and its wall-clock budget.
const CALIBRATION_REL_TOL: f64 = 0.01;
const CALIBRATION_BUDGET_SECS: f64 = 10.0;
/// Criterion 2: wall-clock budget for the full clipping-bound grid.
const CLIP_GRID_BUDGET_SECS: f64 = 120.0;
/// Criteria 3–6: allowed deviation of the fitted slope from its target.
const SLOPE_TOL_ANYTIME: f64 = 0.15; // target (1−p)/p = −1/3 at p = 1.5
const SLOPE_TOL_FINITE_VARIANCE: f64 = 0.10; // target −1/2 at p = 2
const SLOPE_TOL_STRONGLY_CONVEX: f64 = 0.20; // target 2(1−p)/p = −2/3
const SLOPE_TOL_NOISE_FREE: f64 = 0.10; // target −1/2
const ANYTIME_BUDGET_SECS: f64 = 300.0;
/// Criterion 8: iterate-boundedness and movement-floor sensitivity.
const DISTANCE_BOUND_MIN_FRACTION: f64 = 0.90;
const FLOOR_SPREAD_MAX_FACTOR: f64 = 25.0;
/// Criterion 9: allowed ratio of the 0.95 error quantile to the median.
const TAIL_RATIO_MAX: f64 = 20.0;
/// Criterion 10: error decay requirement and mirror-step oracle agreement.
const SIMPLEX_DECAY_MAX_RATIO: f64 = 0.10;
const MIRROR_STEP_ORACLE_TOL: f64 = 1e-8;

/// Serializes the tests that saturate the shared worker pool, so per-test
/// wall-clock budgets are meaningful.
static HEAVY: Mutex<()> = Mutex::new(());

fn heavy() -> std::sync::MutexGuard<'static, ()> {
    HEAVY.lock().unwrap_or_else(|poison| poison.into_inner())
}

// ---------------------------------------------------------------------------
// Helpers
// ---------------------------------------------------------------------------

const CONFIG_DIR: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs");

fn scratch(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("clipgrad_acceptance_{}_{tag}", std::process::id()));
    std::fs::create_dir_all(&dir).expect("create scratch dir");
    dir
}

/// Load a shipped recipe and point its artifacts at a scratch directory.
fn shipped(name: &str, tag: &str) -> ExperimentConfig {
    let mut config =
        load_config(&Path::new(CONFIG_DIR).join(name)).expect("shipped config loads cleanly");
    config.sweep.output = scratch(tag).display().to_string();
    config
}

fn report(n: u32, label: &str, detail: &str) {
    println!("criterion {n:02} {label}: PASS ({detail})");
}

/// Median by the same order-statistic rule the library uses (lower
/// interpolation at index ⌊q(n−1)⌋).
fn quantile(sorted: &[f64], q: f64) -> f64 {
    sorted[(q * (sorted.len() - 1) as f64).floor() as usize]
}

/// The regime constants the shipped fit reports use: subgradient bound from
/// the problem, clip scale and moment order from the config.
fn regime_of(config: &ExperimentConfig) -> RegimeParams {
    let problem = config.problem.build().expect("problem builds");
    RegimeParams {
        g: problem.lipschitz(Norm::L2),
        m: config.schedule.m,
        p: config.noise.p,
    }
}

fn median_slope(config: &ExperimentConfig, regime: Option<&RegimeParams>) -> (f64, usize) {
    let records = run_sweep(config).expect("sweep runs");
    let fit = fit_rate(&records, Aggregation::Median, regime).expect("fit succeeds");
    (fit.slope, fit.n_points)
}

/// The ten-dimensional cone test bed used for the clipping-bound grid:
/// subgradient norm exactly 1 away from the apex, evaluated at a feasible
/// point well inside a ball.
fn clip_test_problem() -> clipgrad::problems::Problem {
    ProblemSpec {
        kind: ProblemKind::Cone,
        dim: 10,
        lipschitz: Some(1.0),
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
    .expect("cone test bed builds")
}

// ---------------------------------------------------------------------------
// 1. Noise calibration
// ---------------------------------------------------------------------------

#[test]
fn criterion_01_noise_calibration() {
    let _guard = heavy();
    let started = Instant::now();

    let noise = NoiseSpec {
        family: NoiseFamily::SpherePareto,
        p: 1.5,
        sigma: 1.0,
        norm: Norm::L2,
        shape: Some(1.75),
    }
    .build(10)
    .expect("noise builds");
    let k = 100.0 * noise.magnitude_scale().expect("magnitude scale");
    let analytic = noise.truncated_moment_p(k).expect("closed form available");
    let empirical =
        empirical_truncated_moment(&noise, k, 1_000_000, 0).expect("sampling succeeds");
    let rel = (empirical - analytic).abs() / analytic;
    let elapsed = started.elapsed().as_secs_f64();

    assert!(
        rel <= CALIBRATION_REL_TOL,
        "empirical truncated moment {empirical:.8e} deviates from analytic {analytic:.8e} \
         by {rel:.3e} (allowed {CALIBRATION_REL_TOL})"
    );
    assert!(
        elapsed < CALIBRATION_BUDGET_SECS,
        "calibration took {elapsed:.1}s (budget {CALIBRATION_BUDGET_SECS}s)"
    );
    report(
        1,
        "noise calibration",
        &format!("relative error {rel:.2e} at 1e6 samples, {elapsed:.2}s"),
    );
}

// ---------------------------------------------------------------------------
// 2. Clipping-error bounds over the parameter grid
// ---------------------------------------------------------------------------

#[test]
fn criterion_02_clipping_error_bounds() {
    let _guard = heavy();
    let started = Instant::now();
    let problem = clip_test_problem();
    let g = problem.lipschitz(Norm::L2);

    let mut points = 0u32;
    let mut checks = 0u32;
    let mut seed = 0u64;
    for &p in &[1.1, 1.5, 2.0] {
        for &sigma in &[0.5, 1.0, 4.0] {
            let noise = NoiseSpec {
                family: NoiseFamily::SpherePareto,
                p,
                sigma,
                norm: Norm::L2,
                shape: Some(p + 0.25),
            }
            .build(problem.dim())
            .expect("noise builds");

            // Clip levels 2G, 4G, and σ·T^(1/p) for T ∈ {10, 10³}, floored
            // at the 2G the bounds presuppose.
            let mut levels = vec![
                2.0 * g,
                4.0 * g,
                (sigma * 10f64.powf(1.0 / p)).max(2.0 * g),
                (sigma * 1e3f64.powf(1.0 / p)).max(2.0 * g),
            ];
            levels.sort_by(|a, b| a.partial_cmp(b).unwrap());
            levels.dedup_by(|a, b| a.to_bits() == b.to_bits());

            for m in levels {
                seed += 1;
                let check =
                    verify_clip_bounds(&problem, &noise, problem.start(), m, 1_000_000, seed)
                        .expect("bound check runs");
                for c in &check.checks {
                    assert!(
                        c.pass,
                        "bound `{}` failed at p={p} sigma={sigma} m={m}: observed \
                         {:.6e} > bound {:.6e} + cushion {:.6e}",
                        c.label, c.observed, c.bound, c.cushion
                    );
                    checks += 1;
                }
                points += 1;
            }
        }
    }
    let elapsed = started.elapsed().as_secs_f64();
    assert!(
        elapsed < CLIP_GRID_BUDGET_SECS,
        "clip grid took {elapsed:.1}s (budget {CLIP_GRID_BUDGET_SECS}s)"
    );
    report(
        2,
        "clipping-error bounds",
        &format!("{checks} bound checks over {points} grid points, {elapsed:.1}s"),
    );
}

// ---------------------------------------------------------------------------
// 3–5. Convergence-rate exponents
// ---------------------------------------------------------------------------

#[test]
fn criterion_03_convex_anytime_rate() {
    let _guard = heavy();
    let started = Instant::now();
    let config = shipped("thm1_anytime.toml", "crit03");
    let regime = regime_of(&config);
    let (slope, n_points) = median_slope(&config, Some(&regime));
    let elapsed = started.elapsed().as_secs_f64();

    let target = -1.0 / 3.0;
    assert!(
        (slope - target).abs() <= SLOPE_TOL_ANYTIME,
        "median slope {slope:.4} outside {target:.4} ± {SLOPE_TOL_ANYTIME}"
    );
    assert_eq!(n_points, 4, "all four horizons lie in the noise regime");
    assert!(
        elapsed < ANYTIME_BUDGET_SECS,
        "sweep took {elapsed:.1}s (budget {ANYTIME_BUDGET_SECS}s)"
    );
    report(
        3,
        "convex anytime rate",
        &format!("slope {slope:.4} vs {target:.4} ± {SLOPE_TOL_ANYTIME}, {elapsed:.1}s"),
    );
}

#[test]
fn criterion_04_finite_variance_recovery() {
    let _guard = heavy();
    let config = shipped("thm2_fixed.toml", "crit04");
    let regime = regime_of(&config);
    let (slope, _) = median_slope(&config, Some(&regime));

    assert!(
        (slope + 0.5).abs() <= SLOPE_TOL_FINITE_VARIANCE,
        "median slope {slope:.4} outside -0.5 ± {SLOPE_TOL_FINITE_VARIANCE}"
    );
    report(
        4,
        "finite-variance recovery",
        &format!("slope {slope:.4} vs -0.5 ± {SLOPE_TOL_FINITE_VARIANCE}"),
    );
}

#[test]
fn criterion_05_strongly_convex_rate() {
    let _guard = heavy();
    let config = shipped("thm5_strongly.toml", "crit05");
    let regime = regime_of(&config);
    let (slope, _) = median_slope(&config, Some(&regime));

    let target = -2.0 / 3.0;
    assert!(
        (slope - target).abs() <= SLOPE_TOL_STRONGLY_CONVEX,
        "median slope {slope:.4} outside {target:.4} ± {SLOPE_TOL_STRONGLY_CONVEX}"
    );
    report(
        5,
        "strongly convex rate",
        &format!("slope {slope:.4} vs {target:.4} ± {SLOPE_TOL_STRONGLY_CONVEX}"),
    );
}

// ---------------------------------------------------------------------------
// 6. Deterministic degeneration to plain projected SGD
// ---------------------------------------------------------------------------

#[test]
fn criterion_06_deterministic_degeneration() {
    let _guard = heavy();

    // Part one: with zero noise and zero clip scale the clipped method must
    // reproduce unclipped projected subgradient descent *exactly*. The
    // reference below never clips and never draws noise.
    let config = shipped("thm2_fixed.toml", "crit06");
    let problem = config.problem.build().expect("problem builds");
    let noise = NoiseSpec {
        family: NoiseFamily::Zero,
        p: 2.0,
        sigma: 0.0,
        norm: Norm::L2,
        shape: None,
    }
    .build(problem.dim())
    .expect("zero noise builds");
    let horizon = 4096u64;
    let schedule = ScheduleSpec {
        kind: ScheduleKind::FixedConvex,
        g: problem.lipschitz(Norm::L2),
        p: 2.0,
        m: 0.0,
        alpha: Some(10.0),
        beta: None,
        delta: None,
        horizon: Some(horizon),
        mu: None,
        sigma: None,
        r: None,
        w_family: None,
    }
    .build()
    .expect("schedule builds");

    let mut rng = ChaCha12Rng::seed_from_u64(5);
    let record = run_sgd(
        &problem,
        &noise,
        &schedule,
        horizon,
        problem.start(),
        &mut rng,
        Averaging::Uniform,
    )
    .expect("clipped run succeeds");

    let dim = problem.dim();
    let mut x = problem.start().to_vec();
    let mut grad = vec![0.0; dim];
    let mut avg = VectorAverage::new(dim);
    for t in 1..=horizon {
        avg.push(1.0, &x);
        problem.subgradient_into(&x, &mut grad);
        let eta = schedule.step_pure(t);
        for (v, g) in x.iter_mut().zip(&grad) {
            *v -= eta * g;
        }
        problem.project_into(&mut x);
    }
    let reference_average = avg.mean();

    for (i, (a, b)) in record
        .final_average
        .iter()
        .zip(&reference_average)
        .enumerate()
    {
        assert_eq!(
            a.to_bits(),
            b.to_bits(),
            "average coordinate {i} differs: clipped {a:.17e} vs reference {b:.17e}"
        );
    }
    assert_eq!(record.final_error.to_bits(), problem.gap(&reference_average).to_bits());
    assert_eq!(record.last_iterate_error.to_bits(), problem.gap(&x).to_bits());
    assert_eq!(
        record.last_iterate_dist_sq.to_bits(),
        dist_sq(&x, problem.minimizer()).to_bits()
    );

    // Part two: the noise-free error still decays like T^(-1/2) on the
    // horizon grid.
    let mut config = shipped("thm2_fixed.toml", "crit06_slope");
    config.noise.family = NoiseFamily::Zero;
    config.noise.sigma = 0.0;
    config.schedule.m = 0.0;
    config.sweep.replications = 1;
    let (slope, _) = median_slope(&config, None);
    assert!(
        (slope + 0.5).abs() <= SLOPE_TOL_NOISE_FREE,
        "noise-free slope {slope:.4} outside -0.5 ± {SLOPE_TOL_NOISE_FREE}"
    );

    report(
        6,
        "deterministic degeneration",
        &format!("bitwise equality over T={horizon}, noise-free slope {slope:.4}"),
    );
}

// ---------------------------------------------------------------------------
// 7. Schedule invariants
// ---------------------------------------------------------------------------

#[test]
fn criterion_07_schedule_invariants() {
    // Step–clip product and clip floor, exactly, across a 3×3×3 grid of the
    // horizon-free convex schedule, scanned to t = 10⁶.
    let max_t = 1_000_000u64;
    let mut audited = 0u32;
    for &g in &[0.5, 1.0, 4.0] {
        for &p in &[1.1, 1.5, 2.0] {
            for &m in &[0.0, 1.0, 10.0] {
                let schedule = ScheduleSpec {
                    kind: ScheduleKind::AnytimeConvex,
                    g,
                    p,
                    m,
                    alpha: Some(2.0),
                    beta: None,
                    delta: None,
                    horizon: None,
                    mu: None,
                    sigma: None,
                    r: None,
                    w_family: None,
                }
                .build()
                .expect("schedule builds");
                let audit = schedule.audit(max_t, &[]);
                assert_eq!(
                    audit.step_bound_ok,
                    Some(true),
                    "step–clip bound violated at g={g} p={p} m={m}, first at t={:?}",
                    audit.first_violation
                );
                assert!(audit.floor_ok, "clip floor violated at g={g} p={p} m={m}");
                assert!(audit.pass(), "audit failed at g={g} p={p} m={m}");
                audited += 1;
            }
        }
    }

    // Partial sums of 1/(t·w_t) stay below the family constant W up to 10⁷,
    // for both weight families.
    let families = [
        ("log-squared", WFamily::LogSquared),
        ("iterated-log", WFamily::IteratedLog { n: 1, eps: 1.0 }),
    ];
    for (name, family) in &families {
        let w_total = family.total();
        let mut sum = KahanSum::default();
        for t in 1..=10_000_000u64 {
            let tf = t as f64;
            sum.add(1.0 / (tf * family.weight(tf)));
        }
        assert!(
            sum.value() <= w_total,
            "{name}: partial sum {:.12} exceeds W = {w_total:.12} at T = 1e7",
            sum.value()
        );
    }

    report(
        7,
        "schedule invariants",
        &format!("{audited} audits to t=1e6, weighted partial sums below W at T=1e7"),
    );
}

// ---------------------------------------------------------------------------
// 8. Distance-adaptive behavior
// ---------------------------------------------------------------------------

#[test]
fn criterion_08_distance_adaptive_behavior() {
    let _guard = heavy();
    let base = shipped("thm3_dog.toml", "crit08");
    let problem = base.problem.build().expect("problem builds");
    let noise = base.noise.build(problem.dim()).expect("noise builds");
    let d1 = dist_l2(problem.start(), problem.minimizer());

    let floors = [1e-3, 1e-1, 10.0];
    let mut medians = Vec::new();
    for (i, &r) in floors.iter().enumerate() {
        let mut config = shipped("thm3_dog.toml", &format!("crit08_r{i}"));
        config.schedule.r = Some(r);
        config.sweep.horizons = vec![100_000];
        let records = run_sweep(&config).expect("sweep runs");
        assert_eq!(records.len(), 200);

        // (a) the squared iterate excursion stays below 3·d₁² + r²/2 in at
        // least 90% of the runs.
        let bound = 3.0 * d1 * d1 + r * r / 2.0;
        let within = records
            .iter()
            .filter(|rec| rec.distance_max * rec.distance_max <= bound)
            .count();
        let fraction = within as f64 / records.len() as f64;
        assert!(
            fraction >= DISTANCE_BOUND_MIN_FRACTION,
            "r={r}: distance bound held in only {within}/{} runs",
            records.len()
        );

        // (c) the movement-sequence inequality holds for every run.
        for rec in &records {
            let lhs = rec.seq_lhs.expect("distance-adaptive runs record it");
            let rhs = rec.seq_rhs.expect("distance-adaptive runs record it");
            assert!(
                lhs >= rhs,
                "r={r} seed={}: sequence value {lhs:.6e} below its lower bound {rhs:.6e}",
                rec.seed
            );
            assert!(rec.r_final.expect("radius recorded") >= r);
        }

        let mut errs: Vec<f64> = records.iter().map(|rec| rec.final_error).collect();
        errs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        medians.push(quantile(&errs, 0.5));
    }

    // (b) the final error reacts only logarithmically to four orders of
    // magnitude of movement floor.
    let spread = medians.iter().cloned().fold(f64::MIN, f64::max)
        / medians.iter().cloned().fold(f64::MAX, f64::min);
    assert!(
        spread <= FLOOR_SPREAD_MAX_FACTOR,
        "medians {medians:?} spread by a factor {spread:.2} (allowed {FLOOR_SPREAD_MAX_FACTOR})"
    );

    // Cross-check the recorded selection machinery against the standalone
    // functions on a horizon short enough to keep the full radius history.
    let mut config = shipped("thm3_dog.toml", "crit08_hist");
    config.sweep.horizons = vec![2048];
    let record = run_one(&config, &problem, &noise, 2048, config.sweep.seed_start)
        .expect("short run succeeds");
    let history = record.r_history.as_ref().expect("full history kept");
    assert_eq!(history.len(), 2049);
    assert_eq!(
        history[0].to_bits(),
        config.schedule.r.unwrap().to_bits(),
        "the first radius is exactly the movement floor"
    );
    assert_eq!(
        select_index(history).expect("selection works"),
        record.selected_index.expect("recorded"),
    );
    assert_eq!(
        sequence_bound_rhs(2048, history[0], *history.last().unwrap()).to_bits(),
        record.seq_rhs.unwrap().to_bits(),
    );
    let mut prefix = KahanSum::default();
    let mut best = f64::NEG_INFINITY;
    for t in 1..history.len() {
        prefix.add(history[t - 1]);
        let c = prefix.value() / history[t];
        if c > best {
            best = c;
        }
    }
    assert_eq!(best.to_bits(), record.seq_lhs.unwrap().to_bits());

    report(
        8,
        "distance-adaptive behavior",
        &format!(
            "distance bound ≥ 90% at all floors, median spread ×{spread:.2} ≤ \
             {FLOOR_SPREAD_MAX_FACTOR}, sequence inequality 600/600"
        ),
    );
}

// ---------------------------------------------------------------------------
// 9. Tail quantile control
// ---------------------------------------------------------------------------

#[test]
fn criterion_09_tail_quantile_control() {
    let _guard = heavy();
    let mut config = shipped("thm1_anytime.toml", "crit09");
    config.sweep.horizons = vec![10_000];
    config.sweep.replications = 500;
    let records = run_sweep(&config).expect("sweep runs");

    let mut errs: Vec<f64> = records.iter().map(|rec| rec.final_error).collect();
    errs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = quantile(&errs, 0.5);
    let q95 = quantile(&errs, 0.95);
    let ratio = q95 / median;
    assert!(
        ratio <= TAIL_RATIO_MAX,
        "q95 {q95:.4e} over median {median:.4e} is ×{ratio:.2} (allowed {TAIL_RATIO_MAX})"
    );
    report(
        9,
        "tail quantile control",
        &format!("q95/median ×{ratio:.2} ≤ {TAIL_RATIO_MAX} over 500 seeds at T=1e4"),
    );
}

// ---------------------------------------------------------------------------
// 10. Mirror descent on the simplex
// ---------------------------------------------------------------------------

/// Solve `min_y η·⟨g, y⟩ + KL(y ‖ x)` over the simplex by damped Newton on
/// the interior optimality system (gradient equal across coordinates, total
/// mass one) — an independent numerical oracle that never uses the
/// closed-form exponential update.
fn newton_prox(x: &[f64], g: &[f64], eta: f64) -> Vec<f64> {
    let d = x.len();
    let mut y = x.to_vec();
    let mut c = 1.0 + eta * g.iter().sum::<f64>() / d as f64;
    for _ in 0..200 {
        // Residuals of stationarity and of the mass constraint.
        let res: Vec<f64> = (0..d)
            .map(|i| eta * g[i] + (y[i] / x[i]).ln() + 1.0 - c)
            .collect();
        let mass_res = y.iter().sum::<f64>() - 1.0;
        let max_res = res
            .iter()
            .fold(mass_res.abs(), |acc, r| acc.max(r.abs()));
        if max_res <= 1e-13 {
            break;
        }
        // Newton step on the bordered diagonal system.
        let sum_y: f64 = y.iter().sum();
        let weighted: f64 = y.iter().zip(&res).map(|(yi, ri)| yi * ri).sum();
        let dc = (weighted - mass_res) / sum_y;
        let dy: Vec<f64> = y
            .iter()
            .zip(&res)
            .map(|(yi, ri)| yi * (dc - ri))
            .collect();
        // Damp to stay strictly positive.
        let mut step = 1.0;
        while y.iter().zip(&dy).any(|(yi, di)| yi + step * di <= 0.0) {
            step *= 0.5;
        }
        for (yi, di) in y.iter_mut().zip(&dy) {
            *yi += step * di;
        }
        c += step * dc;
    }
    y
}

#[test]
fn criterion_10_mirror_descent_on_the_simplex() {
    let _guard = heavy();

    // (a) the averaged error at T = 1e5 is far below its T = 1e2 value.
    let mut config = shipped("md_simplex.toml", "crit10");
    config.sweep.horizons = vec![100, 100_000];
    let records = run_sweep(&config).expect("sweep runs");
    let median_at = |t: u64| {
        let mut errs: Vec<f64> = records
            .iter()
            .filter(|rec| rec.t == t)
            .map(|rec| rec.final_error)
            .collect();
        assert_eq!(errs.len(), 100);
        errs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        quantile(&errs, 0.5)
    };
    let early = median_at(100);
    let late = median_at(100_000);
    let ratio = late / early;
    assert!(
        ratio < SIMPLEX_DECAY_MAX_RATIO,
        "median error at T=1e5 is {ratio:.4} of its T=1e2 value (need < {SIMPLEX_DECAY_MAX_RATIO})"
    );

    // (b) the exponentiated-gradient step agrees with the independent
    // proximal-objective oracle on random instances.
    let mut rng = ChaCha12Rng::seed_from_u64(42);
    let d = 20usize;
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let mut x: Vec<f64> = (0..d).map(|_| rng.random::<f64>() + 0.05).collect();
        let mass: f64 = x.iter().sum();
        for xi in &mut x {
            *xi /= mass;
        }
        let g: Vec<f64> = (0..d).map(|_| 4.0 * (rng.random::<f64>() - 0.5)).collect();
        let eta = 0.01 + rng.random::<f64>();

        let stepped = mirror_step_simplex(&x, &g, eta);
        let oracle = newton_prox(&x, &g, eta);
        let diff = stepped
            .iter()
            .zip(&oracle)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        worst = worst.max(diff);
        assert!(
            diff <= MIRROR_STEP_ORACLE_TOL,
            "mirror step deviates from the proximal oracle by {diff:.3e} \
             (allowed {MIRROR_STEP_ORACLE_TOL:.0e}) at eta={eta:.3}"
        );
    }

    report(
        10,
        "mirror descent on the simplex",
        &format!(
            "T=1e5 error at {:.3}% of T=1e2 (need < 10%), oracle agreement ≤ {worst:.1e} \
             over 1000 instances",
            100.0 * ratio
        ),
    );
}

// ---------------------------------------------------------------------------
// 11. Determinism and persistence
// ---------------------------------------------------------------------------

#[test]
fn criterion_11_determinism_and_persistence() {
    let _guard = heavy();

    // Byte-identical results under explicit 1-thread and 8-thread pools.
    let shrink = |tag: &str| {
        let mut config = shipped("thm1_anytime.toml", tag);
        config.sweep.horizons = vec![8, 16, 32];
        config.sweep.replications = 3;
        config
    };
    let config_single = shrink("crit11_single");
    let config_eight = shrink("crit11_eight");
    let pool = |n: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .expect("pool builds")
    };
    pool(1)
        .install(|| run_sweep(&config_single))
        .expect("single-thread sweep");
    pool(8)
        .install(|| run_sweep(&config_eight))
        .expect("eight-thread sweep");
    let bytes_single =
        std::fs::read(Path::new(&config_single.sweep.output).join("results.csv")).unwrap();
    let bytes_eight =
        std::fs::read(Path::new(&config_eight.sweep.output).join("results.csv")).unwrap();
    assert_eq!(
        bytes_single, bytes_eight,
        "results.csv differs between 1 and 8 worker threads"
    );

    // Lossless config round trip: serialize, reparse, and compare both the
    // canonical JSON form and the content digest.
    let config = shipped("thm1_anytime.toml", "crit11_roundtrip");
    let toml_text = toml::to_string(&config).expect("config serializes");
    let reparsed: ExperimentConfig = toml::from_str(&toml_text).expect("config reparses");
    assert_eq!(
        to_canonical_json(&config).unwrap(),
        to_canonical_json(&reparsed).unwrap(),
        "round trip changed the config"
    );
    assert_eq!(config_digest(&config), config_digest(&reparsed));

    report(
        11,
        "determinism and persistence",
        &format!(
            "{} identical bytes across pools, config round trip lossless",
            bytes_single.len()
        ),
    );
}
