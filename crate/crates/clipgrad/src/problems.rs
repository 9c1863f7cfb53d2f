//! Nonsmooth convex test objectives with exactly known optima.
//!
//! Every problem bundles an objective, a feasible set, and a starting point,
//! and knows its constrained minimizer, optimal value, and a subgradient-norm
//! bound over the feasible set in closed form. Exact optima are what let the
//! experiment harness measure `F(x) − F*` directly instead of eyeballing
//! convergence.
//!
//! Objectives:
//!
//! * **Cone** — `F(x) = G·‖x − apex‖₂`, the canonical nonsmooth sharp
//!   objective; its subgradient has Euclidean norm exactly `G` away from the
//!   apex, so the Lipschitz constant is tight.
//! * **Quadratic** — `F(x) = (μ/2)·‖x − center‖₂²`, the strongly convex
//!   benchmark.
//! * **Linear** — `F(x) = c·x`, minimized at an extreme point; the natural
//!   test objective for entropic mirror descent on the probability simplex.
//!
//! Feasible sets: all of space, a Euclidean ball, or the probability simplex.
//! The simplex carries both a Euclidean projection (sort-based, exact) and
//! the closed-form entropic mirror step `x⁺_i ∝ x_i·e^{−η g_i}`.

use serde::{Deserialize, Serialize};

use crate::linalg::{dist_l2, dist_sq, dot, log_sum_exp, norm_l2, norm_linf, Norm};
use crate::{Error, Result};

/// Tolerance used when checking that a supplied point lies in a feasible set.
pub(crate) const MEMBERSHIP_TOL: f64 = 1e-9;

// ---------------------------------------------------------------------------
// Vector shorthand used by config files
// ---------------------------------------------------------------------------

/// A vector given either literally or by a small generator.
///
/// Config files may write any of:
///
/// ```toml
/// apex  = [10.0, 0.0, 0.0]            # explicit entries
/// apex  = { axis = 0, scale = 10.0 }  # scale · e_axis
/// start = { fill = 0.0 }              # constant vector
/// costs = { linspace = [0.0, 1.0] }   # evenly spaced from..=to
/// ```
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum VectorSpec {
    /// Literal entries; length must equal the problem dimension.
    Explicit(Vec<f64>),
    /// `scale · e_axis` (zero-indexed standard basis vector).
    ScaledUnit {
        /// Which coordinate is nonzero.
        axis: usize,
        /// Value of that coordinate.
        scale: f64,
    },
    /// Every coordinate equal to `fill`.
    Constant {
        /// The repeated value.
        fill: f64,
    },
    /// `dim` evenly spaced values from `linspace[0]` to `linspace[1]` inclusive.
    Linspace {
        /// Endpoints `[from, to]`.
        linspace: [f64; 2],
    },
}

impl VectorSpec {
    /// Materialize the vector at dimension `dim`.
    pub fn resolve(&self, dim: usize) -> Result<Vec<f64>> {
        match self {
            VectorSpec::Explicit(v) => {
                if v.len() != dim {
                    return Err(Error::invalid(
                        "vector",
                        format!("expected {dim} entries, got {}", v.len()),
                    ));
                }
                Ok(v.clone())
            }
            VectorSpec::ScaledUnit { axis, scale } => {
                if *axis >= dim {
                    return Err(Error::invalid(
                        "axis",
                        format!("axis {axis} out of range for dimension {dim}"),
                    ));
                }
                let mut v = vec![0.0; dim];
                v[*axis] = *scale;
                Ok(v)
            }
            VectorSpec::Constant { fill } => Ok(vec![*fill; dim]),
            VectorSpec::Linspace { linspace: [a, b] } => {
                if dim < 2 {
                    return Err(Error::invalid(
                        "linspace",
                        "needs dimension at least 2 to place both endpoints",
                    ));
                }
                let step = (b - a) / (dim - 1) as f64;
                Ok((0..dim).map(|i| a + step * i as f64).collect())
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Objectives
// ---------------------------------------------------------------------------

/// A convex objective with an explicit subgradient oracle.
#[derive(Debug, Clone)]
pub enum Objective {
    /// `F(x) = lipschitz · ‖x − apex‖₂`.
    Cone {
        /// Location of the kink (the unconstrained minimizer).
        apex: Vec<f64>,
        /// Slope of the cone; equals the Euclidean subgradient norm.
        lipschitz: f64,
    },
    /// `F(x) = (strong_convexity / 2) · ‖x − center‖₂²`.
    Quadratic {
        /// Unconstrained minimizer.
        center: Vec<f64>,
        /// Curvature `μ > 0`.
        strong_convexity: f64,
    },
    /// `F(x) = costs · x`.
    Linear {
        /// The cost vector.
        costs: Vec<f64>,
    },
}

impl Objective {
    /// Dimension the objective is defined on.
    pub fn dim(&self) -> usize {
        match self {
            Objective::Cone { apex, .. } => apex.len(),
            Objective::Quadratic { center, .. } => center.len(),
            Objective::Linear { costs } => costs.len(),
        }
    }

    /// Objective value at `x`.
    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            Objective::Cone { apex, lipschitz } => lipschitz * dist_l2(x, apex),
            Objective::Quadratic {
                center,
                strong_convexity,
            } => 0.5 * strong_convexity * dist_sq(x, center),
            Objective::Linear { costs } => dot(costs, x),
        }
    }

    /// Write one subgradient at `x` into `out`.
    ///
    /// At the cone apex the zero vector is returned (a valid subgradient,
    /// since the apex minimizes the cone).
    pub fn subgradient_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), out.len());
        match self {
            Objective::Cone { apex, lipschitz } => {
                let d = dist_l2(x, apex);
                if d == 0.0 {
                    out.fill(0.0);
                } else {
                    for ((o, &xi), &ai) in out.iter_mut().zip(x).zip(apex) {
                        *o = lipschitz * (xi - ai) / d;
                    }
                }
            }
            Objective::Quadratic {
                center,
                strong_convexity,
            } => {
                for ((o, &xi), &ci) in out.iter_mut().zip(x).zip(center) {
                    *o = strong_convexity * (xi - ci);
                }
            }
            Objective::Linear { costs } => out.copy_from_slice(costs),
        }
    }

    /// Strong-convexity modulus (zero for the cone and linear objectives).
    pub fn strong_convexity(&self) -> f64 {
        match self {
            Objective::Quadratic {
                strong_convexity, ..
            } => *strong_convexity,
            _ => 0.0,
        }
    }
}

// ---------------------------------------------------------------------------
// Feasible sets
// ---------------------------------------------------------------------------

/// A closed convex feasible set with a Euclidean projection oracle.
#[derive(Debug, Clone)]
pub enum FeasibleSet {
    /// No constraint; projection is the identity.
    Full,
    /// Euclidean ball `{x : ‖x − center‖₂ ≤ radius}`.
    Ball {
        /// Ball center.
        center: Vec<f64>,
        /// Ball radius (positive).
        radius: f64,
    },
    /// Probability simplex `{x : x ≥ 0, Σx = 1}`.
    Simplex,
}

impl FeasibleSet {
    /// Project `x` onto the set in place (Euclidean projection).
    pub fn project_into(&self, x: &mut [f64]) {
        match self {
            FeasibleSet::Full => {}
            FeasibleSet::Ball { center, radius } => {
                let d = dist_l2(x, center);
                if d > *radius {
                    let f = radius / d;
                    for (xi, &ci) in x.iter_mut().zip(center) {
                        *xi = ci + (*xi - ci) * f;
                    }
                }
            }
            FeasibleSet::Simplex => project_simplex(x),
        }
    }

    /// Whether `x` lies in the set, up to tolerance `tol`.
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        match self {
            FeasibleSet::Full => true,
            FeasibleSet::Ball { center, radius } => dist_l2(x, center) <= radius + tol,
            FeasibleSet::Simplex => {
                x.iter().all(|&v| v >= -tol)
                    && (x.iter().sum::<f64>() - 1.0).abs() <= tol
            }
        }
    }
}

/// Euclidean projection onto the probability simplex, in place.
///
/// Sort-based exact algorithm: find the largest prefix of the descending
/// sort whose shifted entries stay positive, then clamp. `O(d log d)`.
pub fn project_simplex(x: &mut [f64]) {
    assert!(!x.is_empty(), "cannot project an empty vector");
    let mut u = x.to_vec();
    u.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        cumsum += ui;
        let t = (cumsum - 1.0) / (i as f64 + 1.0);
        if ui - t > 0.0 {
            theta = t;
        }
    }
    for xi in x.iter_mut() {
        *xi = (*xi - theta).max(0.0);
    }
}

/// Closed-form entropic mirror step on the simplex.
///
/// Returns the minimizer of `η·g·x + KL(x ‖ from)` over the simplex:
/// `x⁺_i ∝ from_i · e^{−η g_i}`, computed in log space so huge `η·g` cannot
/// overflow. Coordinates of `from` that are exactly zero stay zero.
pub fn mirror_step_simplex(from: &[f64], g: &[f64], eta: f64) -> Vec<f64> {
    debug_assert_eq!(from.len(), g.len());
    let logits: Vec<f64> = from
        .iter()
        .zip(g)
        .map(|(&xi, &gi)| xi.ln() - eta * gi)
        .collect();
    let z = log_sum_exp(&logits);
    logits.iter().map(|&l| (l - z).exp()).collect()
}

// ---------------------------------------------------------------------------
// Assembled problems
// ---------------------------------------------------------------------------

/// Objective + feasible set + start, with the optimum solved in closed form.
#[derive(Debug, Clone)]
pub struct Problem {
    objective: Objective,
    feasible: FeasibleSet,
    start: Vec<f64>,
    minimizer: Vec<f64>,
    min_value: f64,
    lipschitz_l2: f64,
    lipschitz_linf: f64,
}

impl Problem {
    /// Assemble and validate a problem, solving for the constrained optimum.
    ///
    /// `start` defaults per feasible set when `None`: the ball center, the
    /// uniform distribution on the simplex, or the origin on all of space.
    pub fn assemble(
        objective: Objective,
        feasible: FeasibleSet,
        start: Option<Vec<f64>>,
    ) -> Result<Problem> {
        let dim = objective.dim();
        if dim == 0 {
            return Err(Error::invalid("dim", "dimension must be at least 1"));
        }
        match &objective {
            Objective::Cone { lipschitz, apex } => {
                if !(*lipschitz > 0.0) || !lipschitz.is_finite() {
                    return Err(Error::invalid(
                        "lipschitz",
                        format!("cone slope must be positive and finite, got {lipschitz}"),
                    ));
                }
                if apex.iter().any(|v| !v.is_finite()) {
                    return Err(Error::invalid("apex", "entries must be finite"));
                }
            }
            Objective::Quadratic {
                strong_convexity,
                center,
            } => {
                if !(*strong_convexity > 0.0) || !strong_convexity.is_finite() {
                    return Err(Error::invalid(
                        "strong_convexity",
                        format!("curvature must be positive and finite, got {strong_convexity}"),
                    ));
                }
                if center.iter().any(|v| !v.is_finite()) {
                    return Err(Error::invalid("center", "entries must be finite"));
                }
            }
            Objective::Linear { costs } => {
                if costs.iter().any(|v| !v.is_finite()) {
                    return Err(Error::invalid("costs", "entries must be finite"));
                }
            }
        }
        match &feasible {
            FeasibleSet::Full => {}
            FeasibleSet::Ball { center, radius } => {
                if center.len() != dim {
                    return Err(Error::invalid(
                        "feasible.center",
                        format!("expected {dim} entries, got {}", center.len()),
                    ));
                }
                if !(*radius > 0.0) || !radius.is_finite() {
                    return Err(Error::invalid(
                        "feasible.radius",
                        format!("radius must be positive and finite, got {radius}"),
                    ));
                }
            }
            FeasibleSet::Simplex => {}
        }

        let (minimizer, min_value) = solve_optimum(&objective, &feasible)?;
        let (lipschitz_l2, lipschitz_linf) = subgradient_bounds(&objective, &feasible)?;

        let start = match start {
            Some(s) => {
                if s.len() != dim {
                    return Err(Error::invalid(
                        "start",
                        format!("expected {dim} entries, got {}", s.len()),
                    ));
                }
                if !feasible.contains(&s, MEMBERSHIP_TOL) {
                    return Err(Error::invalid(
                        "start",
                        "starting point lies outside the feasible set",
                    ));
                }
                s
            }
            None => match &feasible {
                FeasibleSet::Full => vec![0.0; dim],
                FeasibleSet::Ball { center, .. } => center.clone(),
                FeasibleSet::Simplex => vec![1.0 / dim as f64; dim],
            },
        };

        Ok(Problem {
            objective,
            feasible,
            start,
            minimizer,
            min_value,
            lipschitz_l2,
            lipschitz_linf,
        })
    }

    /// Problem dimension.
    pub fn dim(&self) -> usize {
        self.objective.dim()
    }

    /// The objective.
    pub fn objective(&self) -> &Objective {
        &self.objective
    }

    /// The feasible set.
    pub fn feasible(&self) -> &FeasibleSet {
        &self.feasible
    }

    /// Starting point (guaranteed feasible).
    pub fn start(&self) -> &[f64] {
        &self.start
    }

    /// The constrained minimizer.
    pub fn minimizer(&self) -> &[f64] {
        &self.minimizer
    }

    /// The optimal value `F* = F(minimizer)`.
    pub fn min_value(&self) -> f64 {
        self.min_value
    }

    /// Suboptimality `F(x) − F*` (the error metric used everywhere).
    pub fn gap(&self, x: &[f64]) -> f64 {
        self.objective.value(x) - self.min_value
    }

    /// Bound on the subgradient norm over the feasible set, in `norm`.
    pub fn lipschitz(&self, norm: Norm) -> f64 {
        match norm {
            Norm::L2 => self.lipschitz_l2,
            Norm::Linf => self.lipschitz_linf,
        }
    }

    /// Strong-convexity modulus of the objective (0 when merely convex).
    pub fn strong_convexity(&self) -> f64 {
        self.objective.strong_convexity()
    }

    /// Objective value at `x`.
    pub fn value(&self, x: &[f64]) -> f64 {
        self.objective.value(x)
    }

    /// Write one subgradient at `x` into `out`.
    pub fn subgradient_into(&self, x: &[f64], out: &mut [f64]) {
        self.objective.subgradient_into(x, out);
    }

    /// Project `x` onto the feasible set in place.
    pub fn project_into(&self, x: &mut [f64]) {
        self.feasible.project_into(x);
    }
}

/// Closed-form constrained optimum for each objective × set combination.
fn solve_optimum(objective: &Objective, feasible: &FeasibleSet) -> Result<(Vec<f64>, f64)> {
    // For the cone and the quadratic the objective is a monotone function of
    // the distance to a target point, so the constrained minimizer is the
    // Euclidean projection of that target onto the set.
    let project_target = |target: &[f64]| -> Vec<f64> {
        let mut m = target.to_vec();
        feasible.project_into(&mut m);
        m
    };
    match (objective, feasible) {
        (Objective::Cone { apex, .. }, _) => {
            let m = project_target(apex);
            let v = objective.value(&m);
            Ok((m, v))
        }
        (Objective::Quadratic { center, .. }, _) => {
            let m = project_target(center);
            let v = objective.value(&m);
            Ok((m, v))
        }
        (Objective::Linear { .. }, FeasibleSet::Full) => Err(Error::Incompatible(
            "a linear objective is unbounded below on all of space; \
             pick a ball or simplex feasible set"
                .into(),
        )),
        (Objective::Linear { costs }, FeasibleSet::Ball { center, radius }) => {
            let n = norm_l2(costs);
            if n == 0.0 {
                return Err(Error::invalid(
                    "costs",
                    "cost vector must be nonzero on a ball feasible set",
                ));
            }
            let m: Vec<f64> = center
                .iter()
                .zip(costs)
                .map(|(&c, &g)| c - radius * g / n)
                .collect();
            let v = objective.value(&m);
            Ok((m, v))
        }
        (Objective::Linear { costs }, FeasibleSet::Simplex) => {
            // Minimum of a linear function over the simplex sits at the
            // cheapest vertex; ties break to the smallest index.
            let mut best = 0;
            for (i, &c) in costs.iter().enumerate() {
                if c < costs[best] {
                    best = i;
                }
            }
            let mut m = vec![0.0; costs.len()];
            m[best] = 1.0;
            Ok((m, costs[best]))
        }
    }
}

/// Bounds on the subgradient norm over the feasible set, `(L2, L∞)`.
fn subgradient_bounds(objective: &Objective, feasible: &FeasibleSet) -> Result<(f64, f64)> {
    match (objective, feasible) {
        (Objective::Cone { lipschitz, .. }, _) => Ok((*lipschitz, *lipschitz)),
        (Objective::Quadratic { .. }, FeasibleSet::Full) => Err(Error::Incompatible(
            "a quadratic objective has no finite subgradient bound on all of \
             space; pick a ball or simplex feasible set"
                .into(),
        )),
        (
            Objective::Quadratic {
                center,
                strong_convexity,
            },
            FeasibleSet::Ball {
                center: ball_center,
                radius,
            },
        ) => {
            let g = strong_convexity * (radius + dist_l2(ball_center, center));
            Ok((g, g))
        }
        (
            Objective::Quadratic {
                center,
                strong_convexity,
            },
            FeasibleSet::Simplex,
        ) => {
            // ‖x − center‖ is convex, so its maximum over the simplex is at a
            // vertex.
            let dim = center.len();
            let mut worst: f64 = 0.0;
            for i in 0..dim {
                let mut d2 = 0.0;
                for (j, &cj) in center.iter().enumerate() {
                    let xj = if i == j { 1.0 } else { 0.0 };
                    d2 += (xj - cj) * (xj - cj);
                }
                worst = worst.max(d2.sqrt());
            }
            let g = strong_convexity * worst;
            Ok((g, g))
        }
        (Objective::Linear { costs }, _) => Ok((norm_l2(costs), norm_linf(costs))),
    }
}

// ---------------------------------------------------------------------------
// Config-facing specification
// ---------------------------------------------------------------------------

/// Objective selector, as written in config files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    /// Sharp Euclidean cone.
    Cone,
    /// Strongly convex quadratic.
    Quadratic,
    /// Linear costs.
    Linear,
}

/// Feasible-set selector, as written in config files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeasibleKind {
    /// No constraint.
    Full,
    /// Euclidean ball.
    Ball,
    /// Probability simplex.
    Simplex,
}

/// Declarative feasible-set description.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeasibleSpec {
    /// Which set.
    pub kind: FeasibleKind,
    /// Ball center (ball only; defaults to the origin).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<VectorSpec>,
    /// Ball radius (ball only; required).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
}

/// Declarative problem description (the config-file form).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    /// Which objective.
    pub kind: ProblemKind,
    /// Dimension.
    pub dim: usize,
    /// Cone slope (cone only; required).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lipschitz: Option<f64>,
    /// Cone apex (cone only; defaults to the origin).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub apex: Option<VectorSpec>,
    /// Quadratic curvature (quadratic only; required).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strong_convexity: Option<f64>,
    /// Quadratic center (quadratic only; defaults to the origin).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<VectorSpec>,
    /// Cost vector (linear only; required).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub costs: Option<VectorSpec>,
    /// Feasible set.
    pub feasible: FeasibleSpec,
    /// Starting point; defaults per feasible set (ball center, uniform
    /// distribution, or origin).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<VectorSpec>,
}

impl ProblemSpec {
    /// Validate the spec and assemble the runnable problem.
    pub fn build(&self) -> Result<Problem> {
        let dim = self.dim;
        let reject_if = |cond: bool, name: &'static str, kind: &str| -> Result<()> {
            if cond {
                Err(Error::invalid(
                    name,
                    format!("field does not apply to a {kind} objective"),
                ))
            } else {
                Ok(())
            }
        };
        let objective = match self.kind {
            ProblemKind::Cone => {
                reject_if(self.strong_convexity.is_some(), "strong_convexity", "cone")?;
                reject_if(self.center.is_some(), "center", "cone")?;
                reject_if(self.costs.is_some(), "costs", "cone")?;
                let lipschitz = self.lipschitz.ok_or_else(|| {
                    Error::invalid("lipschitz", "cone objective requires a slope")
                })?;
                let apex = match &self.apex {
                    Some(v) => v.resolve(dim)?,
                    None => vec![0.0; dim],
                };
                Objective::Cone { apex, lipschitz }
            }
            ProblemKind::Quadratic => {
                reject_if(self.lipschitz.is_some(), "lipschitz", "quadratic")?;
                reject_if(self.apex.is_some(), "apex", "quadratic")?;
                reject_if(self.costs.is_some(), "costs", "quadratic")?;
                let mu = self.strong_convexity.ok_or_else(|| {
                    Error::invalid(
                        "strong_convexity",
                        "quadratic objective requires a curvature",
                    )
                })?;
                let center = match &self.center {
                    Some(v) => v.resolve(dim)?,
                    None => vec![0.0; dim],
                };
                Objective::Quadratic {
                    center,
                    strong_convexity: mu,
                }
            }
            ProblemKind::Linear => {
                reject_if(self.lipschitz.is_some(), "lipschitz", "linear")?;
                reject_if(self.apex.is_some(), "apex", "linear")?;
                reject_if(self.strong_convexity.is_some(), "strong_convexity", "linear")?;
                reject_if(self.center.is_some(), "center", "linear")?;
                let costs = self
                    .costs
                    .as_ref()
                    .ok_or_else(|| Error::invalid("costs", "linear objective requires costs"))?
                    .resolve(dim)?;
                Objective::Linear { costs }
            }
        };
        let feasible = match self.feasible.kind {
            FeasibleKind::Full => {
                if self.feasible.center.is_some() || self.feasible.radius.is_some() {
                    return Err(Error::invalid(
                        "feasible",
                        "center/radius do not apply to the full space",
                    ));
                }
                FeasibleSet::Full
            }
            FeasibleKind::Ball => {
                let center = match &self.feasible.center {
                    Some(v) => v.resolve(dim)?,
                    None => vec![0.0; dim],
                };
                let radius = self.feasible.radius.ok_or_else(|| {
                    Error::invalid("feasible.radius", "ball feasible set requires a radius")
                })?;
                FeasibleSet::Ball { center, radius }
            }
            FeasibleKind::Simplex => {
                if self.feasible.center.is_some() || self.feasible.radius.is_some() {
                    return Err(Error::invalid(
                        "feasible",
                        "center/radius do not apply to the simplex",
                    ));
                }
                FeasibleSet::Simplex
            }
        };
        let start = match &self.start {
            Some(v) => Some(v.resolve(dim)?),
            None => None,
        };
        Problem::assemble(objective, feasible, start)
    }
}
