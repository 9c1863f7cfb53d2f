//! Small dense-vector helpers shared by the rest of the crate.
//!
//! Everything operates on `&[f64]` / `Vec<f64>`; the problem dimensions in
//! this crate are tiny (tens of coordinates), so there is no payoff in
//! pulling in a linear-algebra dependency. The compensated accumulators exist
//! because runs take up to ten million steps and the iterate averages must be
//! bitwise reproducible and accurate to near machine precision.

use serde::{Deserialize, Serialize};

/// Which norm a component measures vectors in.
///
/// The clipping operator always acts on the norm that is dual to the geometry
/// of the method: the Euclidean norm for projected subgradient descent, the
/// max norm for entropic mirror descent on the simplex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Norm {
    /// Euclidean norm.
    L2,
    /// Maximum absolute coordinate.
    Linf,
}

impl Norm {
    /// Evaluate the norm of `v`.
    pub fn eval(self, v: &[f64]) -> f64 {
        match self {
            Norm::L2 => norm_l2(v),
            Norm::Linf => norm_linf(v),
        }
    }
}

/// Dot product.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Euclidean norm.
pub fn norm_l2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Maximum absolute coordinate; 0 for the empty vector.
pub fn norm_linf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Squared Euclidean distance between `a` and `b`.
pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Euclidean distance between `a` and `b`.
pub fn dist_l2(a: &[f64], b: &[f64]) -> f64 {
    dist_sq(a, b).sqrt()
}

/// Numerically stable `ln Σ exp(v_i)`.
///
/// Returns negative infinity for an empty slice or when every entry is
/// negative infinity (the natural limit), and never overflows for large
/// entries.
pub fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x));
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = v.iter().map(|&x| (x - m).exp()).sum();
    m + sum.ln()
}

/// Kahan–Babuška compensated scalar accumulator.
///
/// Adds values in arrival order with an error-compensation term, so the
/// result is both far more accurate than a naive sum over 1e7 terms and
/// exactly reproducible for a fixed arrival order.
#[derive(Debug, Clone, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    /// New accumulator at zero.
    pub fn new() -> Self {
        Self::default()
    }

    /// Add one term.
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    /// Current compensated value of the sum.
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Compensated weighted running average of vectors.
///
/// Maintains `sum_t w_t * x_t` per coordinate and `sum_t w_t`, each with
/// Kahan compensation. Used for the uniform, linearly weighted, and
/// radius-weighted iterate averages, where `t` can reach 1e7.
#[derive(Debug, Clone)]
pub struct VectorAverage {
    sums: Vec<KahanSum>,
    weight: KahanSum,
}

impl VectorAverage {
    /// New accumulator for `dim`-dimensional vectors.
    pub fn new(dim: usize) -> Self {
        Self {
            sums: vec![KahanSum::new(); dim],
            weight: KahanSum::new(),
        }
    }

    /// Add `x` with weight `w`.
    pub fn push(&mut self, w: f64, x: &[f64]) {
        debug_assert_eq!(x.len(), self.sums.len());
        for (s, &xi) in self.sums.iter_mut().zip(x) {
            s.add(w * xi);
        }
        self.weight.add(w);
    }

    /// Total weight accumulated so far.
    pub fn total_weight(&self) -> f64 {
        self.weight.value()
    }

    /// Current weighted average. Panics if no weight has been accumulated.
    pub fn mean(&self) -> Vec<f64> {
        let w = self.weight.value();
        assert!(w > 0.0, "VectorAverage::mean on empty accumulator");
        self.sums.iter().map(|s| s.value() / w).collect()
    }

    /// Write the current weighted average into `out` without allocating.
    pub fn mean_into(&self, out: &mut [f64]) {
        let w = self.weight.value();
        assert!(w > 0.0, "VectorAverage::mean_into on empty accumulator");
        debug_assert_eq!(out.len(), self.sums.len());
        for (o, s) in out.iter_mut().zip(&self.sums) {
            *o = s.value() / w;
        }
    }
}
