//! The clipping operator and a Monte Carlo verifier for the error bounds it
//! induces.
//!
//! Clipping rescales a stochastic subgradient to norm at most `M`:
//! `clip(g, M) = min(1, M/‖g‖)·g`. It trades a bounded deviation for a bias.
//! Writing `ĝ` for the clipped noisy subgradient, `ξᵘ = ĝ − E[ĝ]` for the
//! zero-mean part and `ξᵇ = E[ĝ] − ∂F(x)` for the bias, the following hold
//! whenever `M ≥ 2G` (twice the subgradient-norm bound) and the noise has
//! `E‖ξ‖ᵖ ≤ σᵖ`:
//!
//! 1. `‖ξᵘ‖ ≤ 2M` surely;
//! 2. `E‖ξᵘ‖² ≤ C·σᵖ·M^{2−p}`, with `C = 10` in the Euclidean norm and
//!    `C = 40` (conservative) in the max norm;
//! 3. `‖ξᵇ‖ ≤ 2·σᵖ·M^{1−p}`;
//! 4. `‖ξᵇ‖² ≤ 10·σᵖ·M^{2−p}`.
//!
//! [`verify_clip_bounds`] checks all four empirically: it draws `N` noisy
//! subgradients at a fixed point, clips them, and compares the sample
//! statistics against the bounds with 3-standard-error cushions. `E[ĝ]` has
//! no closed form, so the empirical mean stands in for it (two passes over
//! the same RNG streams); the substitution error is `O(1/√N)` and absorbed
//! by the cushions.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::linalg::{KahanSum, Norm};
use crate::noise::NoiseOracle;
use crate::problems::Problem;
use crate::{Error, Result};

/// Number of RNG shards the sample budget is split across.
///
/// Fixed (rather than tied to worker count) so results are byte-identical no
/// matter how many threads execute the shards.
const SHARDS: u64 = 64;

/// Floating-point slack applied to every bound comparison, relative to the
/// bound's scale. Orders of magnitude below any statistical cushion; only
/// there so exact-zero bounds tolerate compensated-summation rounding.
const FP_SLACK: f64 = 1e-9;

/// Rescale `g` in place to norm at most `m`; returns the factor applied.
///
/// The factor is `min(1, m/‖g‖)` (so `1.0` means the vector was untouched —
/// and untouched vectors are returned bitwise identical).
pub fn clip_in_place(g: &mut [f64], m: f64, norm: Norm) -> f64 {
    assert!(m >= 0.0, "clip level must be nonnegative");
    let n = norm.eval(g);
    if n <= m {
        1.0
    } else {
        let factor = m / n;
        for x in g.iter_mut() {
            *x *= factor;
        }
        factor
    }
}

/// Non-mutating clipping: returns `min(1, m/‖g‖)·g`.
pub fn clip(g: &[f64], m: f64, norm: Norm) -> Vec<f64> {
    let mut out = g.to_vec();
    clip_in_place(&mut out, m, norm);
    out
}

/// Enforced second-moment constant: `E‖ξᵘ‖² ≤ C·σᵖ·M^{2−p}`.
///
/// `10` for the Euclidean norm; `40` for the max norm (valid, possibly
/// loose — tightness in the general case is not assumed here).
pub fn second_moment_constant(norm: Norm) -> f64 {
    match norm {
        Norm::L2 => 10.0,
        Norm::Linf => 40.0,
    }
}

/// Sample statistics of the clipped-subgradient error at one point.
#[derive(Debug, Clone, Serialize)]
pub struct ClipStats {
    /// Empirical `E‖ξᵘ‖²` (deviation around the empirical mean).
    pub mean_sq_unbiased: f64,
    /// Norm of (empirical mean of clipped samples − clean subgradient).
    pub bias_norm: f64,
    /// Largest single-sample deviation `‖ξᵘ‖` observed.
    pub max_unbiased_norm: f64,
    /// Number of Monte Carlo samples.
    pub samples: u64,
    /// Clip level `M`.
    pub clip_level: f64,
    /// Norm the statistics are measured in.
    pub norm: Norm,
    /// Standard error of the mean vector (Euclidean, `√(tr Cov / N)`).
    pub se_mean: f64,
    /// Standard error of the `mean_sq_unbiased` estimate.
    pub se_mean_sq: f64,
}

/// One bound comparison inside a [`ClipCheck`].
#[derive(Debug, Clone, Serialize)]
pub struct BoundCheck {
    /// Which quantity is checked.
    pub label: &'static str,
    /// Observed sample statistic.
    pub observed: f64,
    /// Theoretical bound it must not exceed.
    pub bound: f64,
    /// Statistical cushion (3 standard errors of the relevant estimator).
    pub cushion: f64,
    /// Whether `observed ≤ bound + cushion` (up to floating-point slack).
    pub pass: bool,
}

/// Full verification report: statistics plus the four bound checks.
#[derive(Debug, Clone, Serialize)]
pub struct ClipCheck {
    /// The measured statistics.
    pub stats: ClipStats,
    /// The four bound comparisons.
    pub checks: Vec<BoundCheck>,
    /// True when every check passed.
    pub pass: bool,
}

fn bound_holds(observed: f64, bound: f64, cushion: f64) -> bool {
    observed <= bound + cushion + FP_SLACK * bound.abs().max(1.0)
}

/// Monte Carlo verification of the clipping-error bounds at the point `x`.
///
/// Draws `samples` noisy subgradients `∂F(x) + ξ`, clips them at `m` in the
/// noise oracle's calibration norm (Euclidean for zero noise), and checks the
/// four bounds listed in the module docs. Requires `m ≥ 2G` where `G` is the
/// problem's subgradient bound in that norm; smaller `m` is a precondition
/// violation and returns an error rather than a failed check.
///
/// Deterministic for fixed `seed`: the budget is split across 64 fixed RNG
/// streams and merged in stream order, so thread count cannot change the
/// result.
pub fn verify_clip_bounds(
    problem: &Problem,
    noise: &NoiseOracle,
    x: &[f64],
    m: f64,
    samples: u64,
    seed: u64,
) -> Result<ClipCheck> {
    let dim = problem.dim();
    if noise.dim() != dim || x.len() != dim {
        return Err(Error::Incompatible(format!(
            "dimension mismatch: problem {dim}, noise {}, point {}",
            noise.dim(),
            x.len()
        )));
    }
    if samples == 0 {
        return Err(Error::invalid("samples", "need at least one sample"));
    }
    if !problem.feasible().contains(x, 1e-9) {
        return Err(Error::invalid("x", "evaluation point must be feasible"));
    }
    let norm = noise.calibration_norm().unwrap_or(Norm::L2);
    let g_bound = problem.lipschitz(norm);
    if m < 2.0 * g_bound {
        return Err(Error::invalid(
            "m",
            format!(
                "clip level {m} is below twice the subgradient bound \
                 (2G = {}); the error bounds are only claimed from there up",
                2.0 * g_bound
            ),
        ));
    }

    let mut clean = vec![0.0; dim];
    problem.subgradient_into(x, &mut clean);

    let counts: Vec<u64> = (0..SHARDS)
        .map(|i| samples / SHARDS + u64::from(i < samples % SHARDS))
        .collect();

    // Pass 1: empirical mean of the clipped samples.
    let shard_sums: Vec<Vec<f64>> = (0..SHARDS)
        .into_par_iter()
        .map(|shard| {
            let mut sums = vec![KahanSum::new(); dim];
            for_each_clipped(noise, &clean, m, norm, seed, shard, counts[shard as usize], |g| {
                for (s, &gi) in sums.iter_mut().zip(g) {
                    s.add(gi);
                }
            });
            sums.into_iter().map(|s| s.value()).collect()
        })
        .collect();
    let mut mean = vec![KahanSum::new(); dim];
    for shard in &shard_sums {
        for (acc, &v) in mean.iter_mut().zip(shard) {
            acc.add(v);
        }
    }
    let mean: Vec<f64> = mean.iter().map(|s| s.value() / samples as f64).collect();

    // Pass 2 (same streams replayed): deviations around that mean.
    struct DevAcc {
        sum_dev_sq: f64,    // clipping-norm deviation, squared
        sum_dev_4th: f64,   // its square, for the standard error
        sum_dev_sq_l2: f64, // Euclidean deviation, for se of the mean vector
        max_dev: f64,
    }
    let shard_devs: Vec<DevAcc> = (0..SHARDS)
        .into_par_iter()
        .map(|shard| {
            let mut sum_dev_sq = KahanSum::new();
            let mut sum_dev_4th = KahanSum::new();
            let mut sum_dev_sq_l2 = KahanSum::new();
            let mut max_dev = 0.0f64;
            let mut diff = vec![0.0; dim];
            for_each_clipped(noise, &clean, m, norm, seed, shard, counts[shard as usize], |g| {
                for ((d, &gi), &mi) in diff.iter_mut().zip(g).zip(&mean) {
                    *d = gi - mi;
                }
                let dev = norm.eval(&diff);
                sum_dev_sq.add(dev * dev);
                sum_dev_4th.add(dev * dev * dev * dev);
                sum_dev_sq_l2.add(crate::linalg::dot(&diff, &diff));
                max_dev = max_dev.max(dev);
            });
            DevAcc {
                sum_dev_sq: sum_dev_sq.value(),
                sum_dev_4th: sum_dev_4th.value(),
                sum_dev_sq_l2: sum_dev_sq_l2.value(),
                max_dev,
            }
        })
        .collect();
    let mut sum_dev_sq = KahanSum::new();
    let mut sum_dev_4th = KahanSum::new();
    let mut sum_dev_sq_l2 = KahanSum::new();
    let mut max_dev = 0.0f64;
    for d in &shard_devs {
        sum_dev_sq.add(d.sum_dev_sq);
        sum_dev_4th.add(d.sum_dev_4th);
        sum_dev_sq_l2.add(d.sum_dev_sq_l2);
        max_dev = max_dev.max(d.max_dev);
    }

    let n = samples as f64;
    let mean_sq = sum_dev_sq.value() / n;
    let var_of_dev_sq = (sum_dev_4th.value() / n - mean_sq * mean_sq).max(0.0);
    let se_mean_sq = (var_of_dev_sq / n).sqrt();
    let se_mean = (sum_dev_sq_l2.value() / n / n).max(0.0).sqrt();

    let diff: Vec<f64> = mean.iter().zip(&clean).map(|(&a, &b)| a - b).collect();
    let bias_norm = norm.eval(&diff);

    let p = noise.p();
    let sigma_p = noise.moment_p();
    let second_moment_bound = second_moment_constant(norm) * sigma_p * m.powf(2.0 - p);
    let bias_bound = 2.0 * sigma_p * m.powf(1.0 - p);
    let bias_sq_bound = 10.0 * sigma_p * m.powf(2.0 - p);

    let checks = vec![
        BoundCheck {
            label: "max_deviation",
            observed: max_dev,
            bound: 2.0 * m,
            cushion: 0.0,
            pass: bound_holds(max_dev, 2.0 * m, 0.0),
        },
        BoundCheck {
            label: "second_moment",
            observed: mean_sq,
            bound: second_moment_bound,
            cushion: 3.0 * se_mean_sq,
            pass: bound_holds(mean_sq, second_moment_bound, 3.0 * se_mean_sq),
        },
        BoundCheck {
            label: "bias",
            observed: bias_norm,
            bound: bias_bound,
            cushion: 3.0 * se_mean,
            pass: bound_holds(bias_norm, bias_bound, 3.0 * se_mean),
        },
        BoundCheck {
            // Checked on the norm scale: ‖ξᵇ‖ ≤ √bound, cushioned like the
            // bias check so the sampling error enters linearly.
            label: "bias_squared",
            observed: bias_norm,
            bound: bias_sq_bound.sqrt(),
            cushion: 3.0 * se_mean,
            pass: bound_holds(bias_norm, bias_sq_bound.sqrt(), 3.0 * se_mean),
        },
    ];
    let pass = checks.iter().all(|c| c.pass);

    Ok(ClipCheck {
        stats: ClipStats {
            mean_sq_unbiased: mean_sq,
            bias_norm,
            max_unbiased_norm: max_dev,
            samples,
            clip_level: m,
            norm,
            se_mean,
            se_mean_sq,
        },
        checks,
        pass,
    })
}

/// Replay shard `shard` of the sample stream, invoking `f` on every clipped
/// noisy subgradient. Both passes of the verifier call this with identical
/// arguments, which is what makes the two-pass estimator storage-free.
fn for_each_clipped<F: FnMut(&[f64])>(
    noise: &NoiseOracle,
    clean: &[f64],
    m: f64,
    norm: Norm,
    seed: u64,
    shard: u64,
    count: u64,
    mut f: F,
) {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(shard);
    let mut buf = vec![0.0; clean.len()];
    for _ in 0..count {
        noise.sample(&mut rng, &mut buf);
        for (b, &c) in buf.iter_mut().zip(clean) {
            *b += c;
        }
        clip_in_place(&mut buf, m, norm);
        f(&buf);
    }
}
