//! Optimization loops.
//!
//! Two methods share the same driver shape:
//!
//! * [`run_sgd`] — projected stochastic subgradient descent with Euclidean
//!   clipping: `x_{t+1} = Π_X(x_t − η_t·clip(∂F(x_t) + ξ_t, M_t))`.
//! * [`run_md`] — entropic mirror descent on the probability simplex with
//!   max-norm clipping, iterated in log space so tiny coordinates never
//!   underflow to hard zeros prematurely.
//!
//! Each run walks a [`Schedule`](crate::schedules::Schedule) for its step and
//! clip sizes, keeps online weighted averages of the trajectory in compensated
//! arithmetic (no iterate storage), and returns a [`RunRecord`] with the final
//! suboptimality, last-iterate statistics, checkpoint errors at powers of two,
//! and — for the distance-adaptive schedule — the movement-radius history and
//! the selected prefix index from [`select_index`].

use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::clip::clip_in_place;
use crate::linalg::{dist_l2, dist_sq, log_sum_exp, norm_l2, norm_linf, KahanSum, Norm, VectorAverage};
use crate::noise::NoiseOracle;
use crate::problems::{FeasibleSet, Problem, MEMBERSHIP_TOL};
use crate::schedules::{Schedule, ScheduleKind, StepSizes};
use crate::{Error, Result};

/// Longest horizon for which the full movement-radius history is stored in
/// the run record. Longer runs keep only the scalar summaries (`r_final`,
/// `seq_lhs`, `seq_rhs`, `selected_index`), which are computed online.
pub const R_HISTORY_MAX: u64 = 4096;

// ---------------------------------------------------------------------------
// Averaging rules
// ---------------------------------------------------------------------------

/// How the reported average point weights the iterates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    /// `x̄_T = (1/T)·Σ x_t`.
    Uniform,
    /// `x̄_T = 2/(T(T+1))·Σ t·x_t` — the weighting for the strongly convex
    /// schedule.
    TWeighted,
    /// `x̄_τ = Σ r_t·x_t / Σ r_t` evaluated at the selected prefix
    /// `τ = I(T)`; requires the distance-adaptive schedule, which supplies
    /// the movement radii `r_t`.
    RWeighted,
}

// ---------------------------------------------------------------------------
// Run records
// ---------------------------------------------------------------------------

/// Suboptimality of the averaged point after `t` steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    /// Number of completed steps.
    pub t: u64,
    /// `F(x̄_t) − F*` for the run's averaging rule (the selected-prefix
    /// average under movement weighting).
    pub error: f64,
}

/// Everything measured about one optimization run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    /// Horizon `T` (number of steps taken).
    pub t: u64,
    /// Seed identifying the RNG stream. The loop itself takes an RNG, so this
    /// is stamped by the sweep harness; direct calls leave it zero.
    pub seed: u64,
    /// Digest of the experiment configuration that produced the run (stamped
    /// by the sweep harness; zero for direct calls).
    pub config_digest: u64,
    /// `F(x̄) − F*` at the reported average point.
    pub final_error: f64,
    /// The reported average point: `x̄_T` under uniform or `t`-weighting,
    /// `x̄_{I(T)}` under movement weighting.
    pub final_average: Vec<f64>,
    /// Movement-weighted runs also record the error of the full-horizon
    /// average `x̄_T` for comparison against the selected prefix.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub full_average_error: Option<f64>,
    /// `F(x_{T+1}) − F*` at the last iterate.
    pub last_iterate_error: f64,
    /// `‖x_{T+1} − x*‖₂²`.
    pub last_iterate_dist_sq: f64,
    /// `max_t ‖x_t − x*‖₂` over the whole trajectory, including `x_{T+1}`.
    pub distance_max: f64,
    /// Final movement radius `r_{T+1}` (distance-adaptive schedule only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_final: Option<f64>,
    /// Selected prefix index `I(T)` (distance-adaptive schedule only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selected_index: Option<u64>,
    /// `max_{t≤T} Σ_{s≤t} r_s / r_{t+1}`, the quantity the selected index
    /// maximizes (distance-adaptive schedule only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seq_lhs: Option<f64>,
    /// Lower bound that `seq_lhs` must dominate, from
    /// [`sequence_bound_rhs`] (distance-adaptive schedule only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seq_rhs: Option<f64>,
    /// Movement radii `r_1, …, r_{T+1}` (distance-adaptive schedule only,
    /// omitted when `T >` [`R_HISTORY_MAX`] to keep records small).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_history: Option<Vec<f64>>,
    /// Anytime errors at a logarithmic grid of step counts (powers of two
    /// and the horizon itself), strictly increasing in `t`. Each entry equals
    /// what `final_error` would have been had the run stopped there.
    pub checkpoints: Vec<Checkpoint>,
}

/// The logarithmic checkpoint grid: every power of two below the horizon,
/// then the horizon itself.
pub fn checkpoint_grid(horizon: u64) -> Vec<u64> {
    assert!(horizon >= 1, "checkpoint_grid needs a positive horizon");
    let mut grid = Vec::new();
    let mut p = 1u64;
    while p < horizon {
        grid.push(p);
        p = p.saturating_mul(2);
    }
    grid.push(horizon);
    grid
}

// ---------------------------------------------------------------------------
// Prefix selection for the distance-adaptive schedule
// ---------------------------------------------------------------------------

/// Pick the prefix index `I(T) ∈ argmax_{t∈[T]} Σ_{s≤t} r_s / r_{t+1}`
/// (smallest maximizer) from the radii `r_1, …, r_{T+1}`.
///
/// The input must hold `T + 1` values — one radius per step plus the
/// post-run radius — so fewer than two values cannot describe a run.
pub fn select_index(r_history: &[f64]) -> Result<u64> {
    if r_history.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "prefix selection needs radii r_1..r_(T+1) for at least one step, got {} value(s)",
            r_history.len()
        )));
    }
    if let Some(bad) = r_history.iter().find(|r| !r.is_finite() || **r <= 0.0) {
        return Err(Error::invalid(
            "r_history",
            format!("radii must be positive and finite, got {bad}"),
        ));
    }
    let mut sum = KahanSum::default();
    let mut best_c = f64::NEG_INFINITY;
    let mut best_t = 1u64;
    for t in 1..r_history.len() {
        sum.add(r_history[t - 1]);
        let c = sum.value() / r_history[t];
        // Strict improvement keeps the smallest maximizer.
        if c > best_c {
            best_c = c;
            best_t = t as u64;
        }
    }
    Ok(best_t)
}

/// Lower bound on `max_{t≤T} Σ_{s≤t} r_s / r_{t+1}` for any non-decreasing
/// positive sequence: `T / ((r_{T+1}/r_1)^{1/T} · (1 + ln(r_{T+1}/r_1)))`.
pub fn sequence_bound_rhs(horizon: u64, r_first: f64, r_last: f64) -> f64 {
    assert!(horizon >= 1 && r_first > 0.0 && r_last >= r_first);
    let ratio = r_last / r_first;
    horizon as f64 / (ratio.powf(1.0 / horizon as f64) * (1.0 + ratio.ln()))
}

// ---------------------------------------------------------------------------
// Shared run tracking
// ---------------------------------------------------------------------------

/// Online statistics for one run: weighted averages, checkpoints, distance
/// tracking, and (for the distance-adaptive schedule) the radius machinery.
struct RunTracker<'a> {
    problem: &'a Problem,
    horizon: u64,
    averaging: Averaging,
    dog: bool,
    avg: VectorAverage,
    grid: Vec<u64>,
    next_grid: usize,
    checkpoints: Vec<Checkpoint>,
    distance_max_sq: f64,
    // Distance-adaptive state.
    r_history: Option<Vec<f64>>,
    r_first: f64,
    r_sum: KahanSum,
    best_c: f64,
    best_t: u64,
    best_avg: Vec<f64>,
    mean_buf: Vec<f64>,
}

impl<'a> RunTracker<'a> {
    fn new(problem: &'a Problem, horizon: u64, averaging: Averaging, dog: bool) -> Self {
        let dim = problem.dim();
        RunTracker {
            problem,
            horizon,
            averaging,
            dog,
            avg: VectorAverage::new(dim),
            grid: checkpoint_grid(horizon),
            next_grid: 0,
            checkpoints: Vec::new(),
            distance_max_sq: 0.0,
            r_history: (dog && horizon <= R_HISTORY_MAX).then(|| Vec::with_capacity(horizon as usize + 1)),
            r_first: f64::NAN,
            r_sum: KahanSum::default(),
            best_c: f64::NEG_INFINITY,
            best_t: 1,
            best_avg: vec![0.0; dim],
            mean_buf: vec![0.0; dim],
        }
    }

    /// Fold in the radius `r_t` decided for step `t`, evaluating the
    /// selection candidate for the previous step (which needs `r_t`).
    fn observe_radius(&mut self, t: u64, r: f64) {
        if !self.dog {
            return;
        }
        if t == 1 {
            self.r_first = r;
        } else {
            // Candidate value for prefix t−1: Σ_{s≤t−1} r_s / r_t.
            let c = self.r_sum.value() / r;
            if c > self.best_c {
                self.best_c = c;
                self.best_t = t - 1;
                if self.averaging == Averaging::RWeighted {
                    self.avg.mean_into(&mut self.best_avg);
                }
            }
        }
        if t <= self.horizon {
            self.r_sum.add(r);
            if let Some(h) = &mut self.r_history {
                h.push(r);
            }
        } else if let Some(h) = &mut self.r_history {
            h.push(r); // the post-run radius r_{T+1}
        }
    }

    /// Record statistics for iterate `x_t` before the step is taken. Must be
    /// called after [`Self::observe_radius`] for the same `t`.
    fn observe_iterate(&mut self, t: u64, x: &[f64], r: Option<f64>) {
        // A checkpoint at t−1 can only be finalized once the selection
        // candidate for t−1 has been evaluated, i.e. here.
        self.flush_checkpoint(t - 1);
        let w = match self.averaging {
            Averaging::Uniform => 1.0,
            Averaging::TWeighted => t as f64,
            Averaging::RWeighted => r.expect("movement weighting without a radius"),
        };
        self.avg.push(w, x);
        let dsq = dist_sq(x, self.problem.minimizer());
        if dsq > self.distance_max_sq {
            self.distance_max_sq = dsq;
        }
    }

    fn flush_checkpoint(&mut self, t: u64) {
        if self.next_grid < self.grid.len() && self.grid[self.next_grid] == t {
            let problem = self.problem;
            let error = problem.gap(self.current_average());
            self.checkpoints.push(Checkpoint { t, error });
            self.next_grid += 1;
        }
    }

    fn current_average(&mut self) -> &[f64] {
        if self.averaging == Averaging::RWeighted {
            &self.best_avg
        } else {
            self.avg.mean_into(&mut self.mean_buf);
            &self.mean_buf
        }
    }

    /// Close out the run: `x_last` is `x_{T+1}` and `r_last` the post-run
    /// radius (distance-adaptive schedules only).
    fn finish(mut self, x_last: &[f64], r_last: Option<f64>) -> RunRecord {
        if self.dog {
            let r = r_last.expect("distance-adaptive run without a final radius");
            self.observe_radius(self.horizon + 1, r);
        }
        self.flush_checkpoint(self.horizon);
        debug_assert_eq!(self.next_grid, self.grid.len());

        let dsq = dist_sq(x_last, self.problem.minimizer());
        if dsq > self.distance_max_sq {
            self.distance_max_sq = dsq;
        }

        let final_average = self.current_average().to_vec();
        let final_error = self.problem.gap(&final_average);
        let full_average_error = (self.averaging == Averaging::RWeighted)
            .then(|| self.problem.gap(&self.avg.mean()));
        let (r_final, selected_index, seq_lhs, seq_rhs) = if self.dog {
            let r = r_last.unwrap();
            (
                Some(r),
                Some(self.best_t),
                Some(self.best_c),
                Some(sequence_bound_rhs(self.horizon, self.r_first, r)),
            )
        } else {
            (None, None, None, None)
        };

        RunRecord {
            t: self.horizon,
            seed: 0,
            config_digest: 0,
            final_error,
            final_average,
            full_average_error,
            last_iterate_error: self.problem.gap(x_last),
            last_iterate_dist_sq: dsq,
            distance_max: self.distance_max_sq.sqrt(),
            r_final,
            selected_index,
            seq_lhs,
            seq_rhs,
            r_history: self.r_history,
            checkpoints: self.checkpoints,
        }
    }
}

// ---------------------------------------------------------------------------
// Validation shared by both loops
// ---------------------------------------------------------------------------

fn validate_common(
    problem: &Problem,
    noise: &NoiseOracle,
    x1: &[f64],
    horizon: u64,
) -> Result<()> {
    if horizon == 0 {
        return Err(Error::invalid("horizon", "must be at least 1"));
    }
    if x1.len() != problem.dim() {
        return Err(Error::Incompatible(format!(
            "start point has dimension {} but the problem has dimension {}",
            x1.len(),
            problem.dim()
        )));
    }
    if noise.dim() != problem.dim() {
        return Err(Error::Incompatible(format!(
            "noise oracle has dimension {} but the problem has dimension {}",
            noise.dim(),
            problem.dim()
        )));
    }
    if !problem.feasible().contains(x1, MEMBERSHIP_TOL) {
        return Err(Error::invalid("x1", "start point must lie in the feasible set"));
    }
    Ok(())
}

fn check_noise_norm(noise: &NoiseOracle, required: Norm, method: &str) -> Result<()> {
    match noise.calibration_norm() {
        None => Ok(()),
        Some(n) if n == required => Ok(()),
        Some(n) => Err(Error::Incompatible(format!(
            "{method} clips in the {required:?} norm but the noise oracle is calibrated in {n:?}"
        ))),
    }
}

// ---------------------------------------------------------------------------
// Projected clipped subgradient descent
// ---------------------------------------------------------------------------

/// Run projected stochastic subgradient descent with Euclidean clipping.
///
/// Per step: draw `ξ_t`, form `ĝ = ∂F(x_t) + ξ_t`, clip it to `‖·‖₂ ≤ M_t`,
/// move by `η_t`, and project back onto the feasible set. The schedule is
/// copied and reset, so the argument is never mutated; distance-adaptive
/// schedules see `‖x_t − x_1‖₂` of the pre-step iterate, making the first
/// radius exactly the movement floor.
///
/// Movement-weighted averaging reports the selected-prefix average
/// `x̄_{I(T)}` and is only meaningful — and only accepted — with the
/// distance-adaptive schedule.
pub fn run_sgd(
    problem: &Problem,
    noise: &NoiseOracle,
    schedule: &Schedule,
    horizon: u64,
    x1: &[f64],
    rng: &mut ChaCha12Rng,
    averaging: Averaging,
) -> Result<RunRecord> {
    validate_common(problem, noise, x1, horizon)?;
    check_noise_norm(noise, Norm::L2, "the subgradient method")?;
    let dog = schedule.kind() == ScheduleKind::DistanceAdaptive;
    if averaging == Averaging::RWeighted && !dog {
        return Err(Error::Incompatible(
            "movement-weighted averaging requires the distance-adaptive schedule".into(),
        ));
    }

    let dim = problem.dim();
    let mut schedule = schedule.clone();
    schedule.reset();

    let mut x = x1.to_vec();
    let mut grad = vec![0.0; dim];
    let mut xi = vec![0.0; dim];
    let mut tracker = RunTracker::new(problem, horizon, averaging, dog);

    for t in 1..=horizon {
        let sizes: StepSizes = schedule.advance(t, dist_l2(&x, x1));
        if let Some(r) = sizes.radius {
            tracker.observe_radius(t, r);
        }
        tracker.observe_iterate(t, &x, sizes.radius);

        problem.subgradient_into(&x, &mut grad);
        noise.sample(rng, &mut xi);
        for (g, n) in grad.iter_mut().zip(&xi) {
            *g += *n;
        }
        clip_in_place(&mut grad, sizes.clip, Norm::L2);
        debug_assert!(norm_l2(&grad) <= sizes.clip * (1.0 + 1e-12));

        for (v, g) in x.iter_mut().zip(&grad) {
            *v -= sizes.eta * g;
        }
        problem.project_into(&mut x);
        debug_assert!(problem.feasible().contains(&x, 1e-6));
    }

    let last = schedule.advance(horizon + 1, dist_l2(&x, x1));
    Ok(tracker.finish(&x, last.radius))
}

// ---------------------------------------------------------------------------
// Entropic mirror descent on the simplex
// ---------------------------------------------------------------------------

/// Run mirror descent on the probability simplex with max-norm clipping.
///
/// The iterate is kept as log-probabilities: one step maps
/// `ℓ ← (ℓ − η_t·g_t) − logsumexp(ℓ − η_t·g_t)`, the exact exponentiated
/// weights update, so coordinates may shrink below the smallest positive
/// float's reach without breaking normalization.
///
/// Requirements: the feasible set must be the simplex, the noise oracle must
/// be calibrated in the max norm (or be noiseless), and the schedule must be
/// one of the convex kinds — the strongly convex and distance-adaptive
/// schedules are tied to Euclidean geometry and are rejected.
pub fn run_md(
    problem: &Problem,
    noise: &NoiseOracle,
    schedule: &Schedule,
    horizon: u64,
    x1: &[f64],
    rng: &mut ChaCha12Rng,
    averaging: Averaging,
) -> Result<RunRecord> {
    validate_common(problem, noise, x1, horizon)?;
    check_noise_norm(noise, Norm::Linf, "mirror descent")?;
    if !matches!(problem.feasible(), FeasibleSet::Simplex) {
        return Err(Error::Incompatible(
            "mirror descent runs on the probability simplex; this problem has a Euclidean feasible set"
                .into(),
        ));
    }
    match schedule.kind() {
        ScheduleKind::AnytimeConvex | ScheduleKind::FixedConvex => {}
        kind => {
            return Err(Error::Incompatible(format!(
                "mirror descent supports the anytime and fixed-horizon convex schedules, not {kind:?}"
            )));
        }
    }
    if averaging == Averaging::RWeighted {
        return Err(Error::Incompatible(
            "movement-weighted averaging requires the distance-adaptive schedule".into(),
        ));
    }

    let dim = problem.dim();
    let mut schedule = schedule.clone();
    schedule.reset();

    let mut x = x1.to_vec();
    let mut log_x: Vec<f64> = x1.iter().map(|v| v.ln()).collect();
    let mut grad = vec![0.0; dim];
    let mut xi = vec![0.0; dim];
    let mut logits = vec![0.0; dim];
    let mut tracker = RunTracker::new(problem, horizon, averaging, false);

    for t in 1..=horizon {
        let sizes = schedule.advance(t, 0.0);
        tracker.observe_iterate(t, &x, None);

        problem.subgradient_into(&x, &mut grad);
        noise.sample(rng, &mut xi);
        for (g, n) in grad.iter_mut().zip(&xi) {
            *g += *n;
        }
        clip_in_place(&mut grad, sizes.clip, Norm::Linf);
        debug_assert!(norm_linf(&grad) <= sizes.clip * (1.0 + 1e-12));

        for ((l, &prev), &g) in logits.iter_mut().zip(&log_x).zip(&grad) {
            *l = prev - sizes.eta * g;
        }
        let z = log_sum_exp(&logits);
        for (lx, &l) in log_x.iter_mut().zip(&logits) {
            *lx = l - z;
        }
        for (v, &lx) in x.iter_mut().zip(&log_x) {
            *v = lx.exp();
        }
        debug_assert!(problem.feasible().contains(&x, 1e-9));
    }

    Ok(tracker.finish(&x, None))
}

// ---------------------------------------------------------------------------
