//! Joint step-size / clip-level schedules.
//!
//! Each schedule produces, for every step `t ≥ 1`, a clip level `M_t` and a
//! step size `η_t` that together keep the clipped-update error controlled:
//! the clip level never drops below `2G` (the hypothesis of the clipping
//! error bounds), and the step size obeys `η_t·M_t ≤ α` by construction —
//! `η_t` is literally the minimum of `α/M_t` and a `1/√t`-type term.
//!
//! Four kinds:
//!
//! * [`ScheduleKind::AnytimeConvex`] — horizon-free: `M_t = 2G ∨ M·t^{1/p}`,
//!   `η_t = α/(G√t) ∧ α/M_t`. With `M = 0` the clip level is the constant
//!   `2G` and the schedule is fully parameter-free.
//! * [`ScheduleKind::FixedConvex`] — the same expressions frozen at a known
//!   horizon `T`; both `M_t` and `η_t` are constants.
//! * [`ScheduleKind::StronglyConvex`] — `M_t` as in the anytime rule and the
//!   classical `η_t = 4/(μ(t+1))` step.
//! * [`ScheduleKind::DistanceAdaptive`] — needs no initial-distance tuning:
//!   the step is `η_t = r_t·γ_t`, where `r_t` is the largest movement from
//!   the start observed so far (floored at a tiny `r`), `γ_t` is a pure
//!   step density built from a weight family `w_t`, and the two scale
//!   constants `α₁, α₂` are pinned by the failure probability `δ` and the
//!   weight family's partial-sum constant `W ≥ Σ 1/(t·w_t)`.
//!
//! The step scale `α` is given either directly or as `β/ln(4/δ)`, the form
//! used when a failure probability is part of the target guarantee.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

// ---------------------------------------------------------------------------
// Weight families
// ---------------------------------------------------------------------------

/// A positive weight sequence `w_t` with `Σ_{t≥1} 1/(t·w_t) ≤ W < ∞`.
///
/// Used by the distance-adaptive schedule, whose constants depend only on
/// the summability constant `W`, not on the pointwise values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WFamily {
    /// `w_t = 1 + (ln t)²`, with `W = 1 + π/2`.
    LogSquared,
    /// `w_t = y⁽ⁿ⁺¹⁾(t)^{1+ε} · ∏_{i=1..n} y⁽ⁱ⁾(t)` where `y(t) = 1 + ln t`
    /// is iterated `i` times; `W = 1 + 1/ε`.
    IteratedLog {
        /// Number of fully iterated logarithm factors.
        n: u32,
        /// Exponent margin on the innermost factor (positive).
        eps: f64,
    },
}

impl WFamily {
    /// Validate parameters.
    pub fn validate(&self) -> Result<()> {
        if let WFamily::IteratedLog { n, eps } = self {
            if !(*eps > 0.0) || !eps.is_finite() {
                return Err(Error::invalid(
                    "w_family.eps",
                    format!("exponent margin must be positive and finite, got {eps}"),
                ));
            }
            if *n > 10 {
                return Err(Error::invalid(
                    "w_family.n",
                    "more than 10 iterated logarithm factors is surely a typo",
                ));
            }
        }
        Ok(())
    }

    /// The weight `w_t` (defined for real `t ≥ 1`).
    pub fn weight(&self, t: f64) -> f64 {
        debug_assert!(t >= 1.0);
        match *self {
            WFamily::LogSquared => {
                let l = t.ln();
                1.0 + l * l
            }
            WFamily::IteratedLog { n, eps } => {
                // y applied once, twice, ..., n+1 times; the innermost factor
                // carries the 1+eps exponent, the rest enter linearly.
                let mut y = t;
                let mut product = 1.0;
                for _ in 0..n {
                    y = 1.0 + y.ln();
                    product *= y;
                }
                y = 1.0 + y.ln();
                product * y.powf(1.0 + eps)
            }
        }
    }

    /// The summability constant `W`.
    pub fn total(&self) -> f64 {
        match *self {
            WFamily::LogSquared => 1.0 + std::f64::consts::FRAC_PI_2,
            WFamily::IteratedLog { eps, .. } => 1.0 + 1.0 / eps,
        }
    }
}

// ---------------------------------------------------------------------------
// Schedule specification
// ---------------------------------------------------------------------------

/// Which schedule family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    /// Horizon-free convex schedule.
    AnytimeConvex,
    /// Fixed-horizon convex schedule (constant step and clip level).
    FixedConvex,
    /// Strongly convex schedule with `η_t = 4/(μ(t+1))`.
    StronglyConvex,
    /// Distance-adaptive schedule (no initial-distance tuning).
    DistanceAdaptive,
}

/// Complete declarative description of a schedule.
///
/// `g` and `p` always apply. `m` is the clip scale (`0` means clip at the
/// constant `2G` — the parameter-free mode). The step scale is `alpha`
/// directly, or `beta` with `delta` meaning `α = β/ln(4/δ)`. The remaining
/// fields are kind-specific and rejected elsewhere: `horizon` (fixed),
/// `mu` (strongly convex), and `sigma`/`delta`/`r`/`w_family`
/// (distance-adaptive, which has no free step scale at all).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    /// Schedule family.
    pub kind: ScheduleKind,
    /// Subgradient-norm bound of the problem (positive).
    pub g: f64,
    /// Noise moment order in `(1, 2]`.
    pub p: f64,
    /// Clip scale `M ≥ 0`; the clip level is `2G ∨ M·t^{1/p}`.
    #[serde(default)]
    pub m: f64,
    /// Step scale, given directly.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Step scale in failure-probability form: `α = β/ln(4/δ)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    /// Failure probability in `(0, 1)`; pairs with `beta`, required for the
    /// distance-adaptive kind.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// Horizon `T` (fixed-horizon kind only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<u64>,
    /// Strong-convexity modulus (strongly convex kind only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    /// Noise moment scale (distance-adaptive kind only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    /// Movement floor `r > 0` (distance-adaptive kind only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    /// Weight family (distance-adaptive kind only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w_family: Option<WFamily>,
}

impl ScheduleSpec {
    /// Validate and build the runnable schedule.
    pub fn build(&self) -> Result<Schedule> {
        if !(self.g > 0.0) || !self.g.is_finite() {
            return Err(Error::invalid(
                "schedule.g",
                format!("subgradient bound must be positive and finite, got {}", self.g),
            ));
        }
        if !(self.p > 1.0 && self.p <= 2.0) {
            return Err(Error::invalid(
                "schedule.p",
                format!("moment order must lie in (1, 2], got {}", self.p),
            ));
        }
        if !(self.m >= 0.0) || !self.m.is_finite() {
            return Err(Error::invalid(
                "schedule.m",
                format!("clip scale must be nonnegative and finite, got {}", self.m),
            ));
        }
        if let Some(d) = self.delta {
            if !(d > 0.0 && d < 1.0) {
                return Err(Error::invalid(
                    "schedule.delta",
                    format!("failure probability must lie in (0, 1), got {d}"),
                ));
            }
        }

        let forbid = |cond: bool, name: &'static str| -> Result<()> {
            if cond {
                Err(Error::invalid(
                    name,
                    "field does not apply to this schedule kind",
                ))
            } else {
                Ok(())
            }
        };

        // The free step scale exists only for the two plain convex kinds.
        let resolve_alpha = || -> Result<f64> {
            let alpha = match (self.alpha, self.beta) {
                (Some(a), None) => {
                    if self.delta.is_some() {
                        return Err(Error::invalid(
                            "schedule.delta",
                            "delta pairs with beta; a direct alpha already \
                             incorporates it",
                        ));
                    }
                    a
                }
                (None, Some(b)) => {
                    let d = self.delta.ok_or_else(|| {
                        Error::invalid("schedule.delta", "beta mode requires delta")
                    })?;
                    b / (4.0 / d).ln()
                }
                (Some(_), Some(_)) => {
                    return Err(Error::invalid(
                        "schedule.alpha",
                        "give either alpha or beta, not both",
                    ))
                }
                (None, None) => {
                    return Err(Error::invalid(
                        "schedule.alpha",
                        "this schedule kind needs a step scale: alpha, or beta \
                         with delta",
                    ))
                }
            };
            if !(alpha > 0.0) || !alpha.is_finite() {
                return Err(Error::invalid(
                    "schedule.alpha",
                    format!("step scale must be positive and finite, got {alpha}"),
                ));
            }
            Ok(alpha)
        };

        match self.kind {
            ScheduleKind::AnytimeConvex => {
                forbid(self.horizon.is_some(), "schedule.horizon")?;
                forbid(self.mu.is_some(), "schedule.mu")?;
                forbid(self.sigma.is_some(), "schedule.sigma")?;
                forbid(self.r.is_some(), "schedule.r")?;
                forbid(self.w_family.is_some(), "schedule.w_family")?;
                let alpha = resolve_alpha()?;
                Ok(Schedule {
                    inner: Inner::Anytime {
                        g: self.g,
                        p: self.p,
                        m_scale: self.m,
                        alpha,
                    },
                })
            }
            ScheduleKind::FixedConvex => {
                forbid(self.mu.is_some(), "schedule.mu")?;
                forbid(self.sigma.is_some(), "schedule.sigma")?;
                forbid(self.r.is_some(), "schedule.r")?;
                forbid(self.w_family.is_some(), "schedule.w_family")?;
                let horizon = self.horizon.ok_or_else(|| {
                    Error::invalid("schedule.horizon", "fixed-horizon kind requires horizon")
                })?;
                if horizon == 0 {
                    return Err(Error::invalid("schedule.horizon", "horizon must be ≥ 1"));
                }
                let alpha = resolve_alpha()?;
                Ok(Schedule {
                    inner: Inner::Fixed {
                        g: self.g,
                        p: self.p,
                        m_scale: self.m,
                        alpha,
                        horizon,
                    },
                })
            }
            ScheduleKind::StronglyConvex => {
                forbid(self.alpha.is_some(), "schedule.alpha")?;
                forbid(self.beta.is_some(), "schedule.beta")?;
                forbid(self.delta.is_some(), "schedule.delta")?;
                forbid(self.horizon.is_some(), "schedule.horizon")?;
                forbid(self.sigma.is_some(), "schedule.sigma")?;
                forbid(self.r.is_some(), "schedule.r")?;
                forbid(self.w_family.is_some(), "schedule.w_family")?;
                let mu = self
                    .mu
                    .ok_or_else(|| Error::invalid("schedule.mu", "strongly convex kind requires mu"))?;
                if !(mu > 0.0) || !mu.is_finite() {
                    return Err(Error::invalid(
                        "schedule.mu",
                        format!("strong-convexity modulus must be positive, got {mu}"),
                    ));
                }
                Ok(Schedule {
                    inner: Inner::Strongly {
                        g: self.g,
                        p: self.p,
                        m_scale: self.m,
                        mu,
                    },
                })
            }
            ScheduleKind::DistanceAdaptive => {
                forbid(self.alpha.is_some(), "schedule.alpha")?;
                forbid(self.beta.is_some(), "schedule.beta")?;
                forbid(self.horizon.is_some(), "schedule.horizon")?;
                forbid(self.mu.is_some(), "schedule.mu")?;
                if self.m != 0.0 {
                    return Err(Error::invalid(
                        "schedule.m",
                        "the distance-adaptive kind derives its clip level from \
                         sigma; m must be omitted or 0",
                    ));
                }
                let sigma = self.sigma.ok_or_else(|| {
                    Error::invalid("schedule.sigma", "distance-adaptive kind requires sigma")
                })?;
                if !(sigma >= 0.0) || !sigma.is_finite() {
                    return Err(Error::invalid(
                        "schedule.sigma",
                        format!("noise scale must be nonnegative, got {sigma}"),
                    ));
                }
                let delta = self.delta.ok_or_else(|| {
                    Error::invalid("schedule.delta", "distance-adaptive kind requires delta")
                })?;
                let r = self
                    .r
                    .ok_or_else(|| Error::invalid("schedule.r", "distance-adaptive kind requires r"))?;
                if !(r > 0.0) || !r.is_finite() {
                    return Err(Error::invalid(
                        "schedule.r",
                        format!("movement floor must be positive, got {r}"),
                    ));
                }
                let w = self.w_family.ok_or_else(|| {
                    Error::invalid("schedule.w_family", "distance-adaptive kind requires w_family")
                })?;
                w.validate()?;
                let (alpha1, alpha2) = distance_adaptive_constants(w.total(), delta);
                Ok(Schedule {
                    inner: Inner::Dog {
                        g: self.g,
                        p: self.p,
                        sigma,
                        delta,
                        w,
                        alpha1,
                        alpha2,
                        r_base: r,
                        r_current: r,
                    },
                })
            }
        }
    }
}

/// The two pinned step constants of the distance-adaptive schedule.
///
/// `α₁ = 1/√(32W)` scales the `1/√(t·w_t)` arm;
/// `α₂ = 1/(8(16/3 + 8√(5W) + 4W)·ln(4/δ)) ∧ 1/√(16(32/3 + 8√(5W) + 80W)·ln(4/δ))`
/// scales the `1/M_t` arm.
pub fn distance_adaptive_constants(w_total: f64, delta: f64) -> (f64, f64) {
    let ln4d = (4.0 / delta).ln();
    let alpha1 = 1.0 / (32.0 * w_total).sqrt();
    let root5w = (5.0 * w_total).sqrt();
    let arm1 = 1.0 / (8.0 * (16.0 / 3.0 + 8.0 * root5w + 4.0 * w_total) * ln4d);
    let arm2 = 1.0 / (16.0 * (32.0 / 3.0 + 8.0 * root5w + 80.0 * w_total) * ln4d).sqrt();
    (alpha1, arm1.min(arm2))
}

// ---------------------------------------------------------------------------
// Runnable schedules
// ---------------------------------------------------------------------------

/// Step size and clip level for one iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSizes {
    /// Step size `η_t`.
    pub eta: f64,
    /// Clip level `M_t`.
    pub clip: f64,
    /// Movement radius `r_t` (distance-adaptive schedules only).
    pub radius: Option<f64>,
}

/// A runnable schedule. Stateless except for the distance-adaptive kind,
/// whose running movement radius grows as the iterates wander.
#[derive(Debug, Clone)]
pub struct Schedule {
    inner: Inner,
}

#[derive(Debug, Clone)]
enum Inner {
    Anytime {
        g: f64,
        p: f64,
        m_scale: f64,
        alpha: f64,
    },
    Fixed {
        g: f64,
        p: f64,
        m_scale: f64,
        alpha: f64,
        horizon: u64,
    },
    Strongly {
        g: f64,
        p: f64,
        m_scale: f64,
        mu: f64,
    },
    Dog {
        g: f64,
        p: f64,
        sigma: f64,
        delta: f64,
        w: WFamily,
        alpha1: f64,
        alpha2: f64,
        r_base: f64,
        r_current: f64,
    },
}

impl Schedule {
    /// Which family this schedule belongs to.
    pub fn kind(&self) -> ScheduleKind {
        match self.inner {
            Inner::Anytime { .. } => ScheduleKind::AnytimeConvex,
            Inner::Fixed { .. } => ScheduleKind::FixedConvex,
            Inner::Strongly { .. } => ScheduleKind::StronglyConvex,
            Inner::Dog { .. } => ScheduleKind::DistanceAdaptive,
        }
    }

    /// The subgradient bound the schedule was built with.
    pub fn g(&self) -> f64 {
        match self.inner {
            Inner::Anytime { g, .. }
            | Inner::Fixed { g, .. }
            | Inner::Strongly { g, .. }
            | Inner::Dog { g, .. } => g,
        }
    }

    /// Resolved step scale `α` (plain convex kinds only).
    pub fn alpha(&self) -> Option<f64> {
        match self.inner {
            Inner::Anytime { alpha, .. } | Inner::Fixed { alpha, .. } => Some(alpha),
            _ => None,
        }
    }

    /// The pinned `(α₁, α₂)` pair (distance-adaptive only).
    pub fn distance_adaptive_alphas(&self) -> Option<(f64, f64)> {
        match self.inner {
            Inner::Dog { alpha1, alpha2, .. } => Some((alpha1, alpha2)),
            _ => None,
        }
    }

    /// Movement floor `r` (distance-adaptive only).
    pub fn movement_floor(&self) -> Option<f64> {
        match self.inner {
            Inner::Dog { r_base, .. } => Some(r_base),
            _ => None,
        }
    }

    /// Clip level `M_t` — a pure function of `t` for every kind.
    pub fn clip_level(&self, t: u64) -> f64 {
        debug_assert!(t >= 1);
        match &self.inner {
            Inner::Anytime { g, p, m_scale, .. } | Inner::Strongly { g, p, m_scale, .. } => {
                (2.0 * g).max(m_scale * (t as f64).powf(1.0 / p))
            }
            Inner::Fixed {
                g, p, m_scale, horizon, ..
            } => (2.0 * g).max(m_scale * (*horizon as f64).powf(1.0 / p)),
            Inner::Dog {
                g, p, sigma, delta, w, ..
            } => {
                let tw = t as f64 * w.weight(t as f64);
                (2.0 * g).max(sigma * (tw / (4.0 / delta).ln()).powf(1.0 / *p))
            }
        }
    }

    /// The trajectory-independent step quantity: `η_t` for the first three
    /// kinds, the step density `γ_t` for the distance-adaptive kind (whose
    /// actual step is `η_t = r_t·γ_t`).
    pub fn step_pure(&self, t: u64) -> f64 {
        debug_assert!(t >= 1);
        match &self.inner {
            Inner::Anytime { g, alpha, .. } => {
                (alpha / (g * (t as f64).sqrt())).min(alpha / self.clip_level(t))
            }
            Inner::Fixed {
                g, alpha, horizon, ..
            } => (alpha / (g * (*horizon as f64).sqrt())).min(alpha / self.clip_level(t)),
            Inner::Strongly { mu, .. } => 4.0 / (mu * (t as f64 + 1.0)),
            Inner::Dog {
                g, w, alpha1, alpha2, ..
            } => {
                let tw = t as f64 * w.weight(t as f64);
                (alpha1 / (g * tw.sqrt())).min(alpha2 / self.clip_level(t))
            }
        }
    }

    /// Step decision for iteration `t`, given the current distance of the
    /// iterate from the starting point (ignored by all but the
    /// distance-adaptive kind, which ratchets its movement radius on it).
    pub fn advance(&mut self, t: u64, dist_from_start: f64) -> StepSizes {
        let clip = self.clip_level(t);
        match &mut self.inner {
            Inner::Dog { r_current, .. } => {
                if dist_from_start > *r_current {
                    *r_current = dist_from_start;
                }
                let r = *r_current;
                StepSizes {
                    eta: r * self.step_pure(t),
                    clip,
                    radius: Some(r),
                }
            }
            _ => StepSizes {
                eta: self.step_pure(t),
                clip,
                radius: None,
            },
        }
    }

    /// Reset trajectory-dependent state (the movement radius) to its initial
    /// value, making the schedule reusable for a fresh run.
    pub fn reset(&mut self) {
        if let Inner::Dog {
            r_base, r_current, ..
        } = &mut self.inner
        {
            *r_current = *r_base;
        }
    }

    /// Scan `t = 1..=max_t` checking the schedule's structural invariants.
    ///
    /// `sample_rows` picks the `t` values echoed into [`AuditReport::rows`]
    /// (powers of two plus `max_t` when empty).
    pub fn audit(&self, max_t: u64, sample_rows: &[u64]) -> AuditReport {
        assert!(max_t >= 1);
        // The step bound η_t ≤ α/M_t is exact by construction (η_t is a min
        // with α/M_t as one arm), so it is checked in that division form;
        // multiplying back η_t·M_t ≤ α could spuriously fail by one ulp.
        let bound_scale = match &self.inner {
            Inner::Anytime { alpha, .. } | Inner::Fixed { alpha, .. } => Some(*alpha),
            Inner::Strongly { .. } => None,
            Inner::Dog { alpha2, .. } => Some(*alpha2),
        };
        let mut step_bound_ok = bound_scale.map(|_| true);
        let mut floor_ok = true;
        let mut step_monotone_ok = true;
        let mut clip_monotone_ok = true;
        let mut first_violation = None;
        let mut max_step_clip = f64::NEG_INFINITY;
        let mut argmax_step_clip = 1;
        let mut prev_step = f64::INFINITY;
        let mut prev_clip = 0.0f64;
        let two_g = 2.0 * self.g();
        let mut rows = Vec::new();
        let default_rows: Vec<u64> = {
            let mut v: Vec<u64> = (0..63)
                .map(|k| 1u64 << k)
                .take_while(|&x| x <= max_t)
                .collect();
            if *v.last().unwrap_or(&0) != max_t {
                v.push(max_t);
            }
            v
        };
        let wanted: &[u64] = if sample_rows.is_empty() {
            &default_rows
        } else {
            sample_rows
        };

        for t in 1..=max_t {
            let step = self.step_pure(t);
            let clip = self.clip_level(t);
            let mut violated = false;
            if let (Some(ok), Some(scale)) = (step_bound_ok.as_mut(), bound_scale) {
                if step > scale / clip {
                    *ok = false;
                    violated = true;
                }
            }
            if clip < two_g {
                floor_ok = false;
                violated = true;
            }
            if step > prev_step {
                step_monotone_ok = false;
                violated = true;
            }
            if clip < prev_clip {
                clip_monotone_ok = false;
                violated = true;
            }
            if violated && first_violation.is_none() {
                first_violation = Some(t);
            }
            let product = step * clip;
            if product > max_step_clip {
                max_step_clip = product;
                argmax_step_clip = t;
            }
            if wanted.contains(&t) {
                rows.push(AuditRow {
                    t,
                    step,
                    clip,
                    step_clip_product: product,
                });
            }
            prev_step = step;
            prev_clip = clip;
        }

        AuditReport {
            kind: self.kind(),
            checked_to: max_t,
            step_bound_ok,
            floor_ok,
            step_monotone_ok,
            clip_monotone_ok,
            max_step_clip,
            argmax_step_clip,
            first_violation,
            rows,
        }
    }
}

/// One sampled row of an audit scan.
#[derive(Debug, Clone, Serialize)]
pub struct AuditRow {
    /// Iteration index.
    pub t: u64,
    /// Pure step quantity at `t` (`η_t`, or `γ_t` for distance-adaptive).
    pub step: f64,
    /// Clip level `M_t`.
    pub clip: f64,
    /// Their product (bounded by the step scale for the convex kinds).
    pub step_clip_product: f64,
}

/// Result of [`Schedule::audit`].
#[derive(Debug, Clone, Serialize)]
pub struct AuditReport {
    /// Schedule family audited.
    pub kind: ScheduleKind,
    /// Upper end of the scanned range (from `t = 1`).
    pub checked_to: u64,
    /// Whether `step ≤ scale/M_t` held everywhere; `None` when the kind has
    /// no step-scale bound (the strongly convex step is `4/(μ(t+1))`).
    pub step_bound_ok: Option<bool>,
    /// Whether `M_t ≥ 2G` held everywhere.
    pub floor_ok: bool,
    /// Whether the pure step quantity was nonincreasing.
    pub step_monotone_ok: bool,
    /// Whether the clip level was nondecreasing.
    pub clip_monotone_ok: bool,
    /// Largest observed `step·M_t`.
    pub max_step_clip: f64,
    /// Where that maximum occurred.
    pub argmax_step_clip: u64,
    /// First `t` at which any check failed, if any.
    pub first_violation: Option<u64>,
    /// Echoed sample rows.
    pub rows: Vec<AuditRow>,
}

impl AuditReport {
    /// True when every applicable check passed.
    pub fn pass(&self) -> bool {
        self.step_bound_ok.unwrap_or(true)
            && self.floor_ok
            && self.step_monotone_ok
            && self.clip_monotone_ok
    }
}
