//! Clipped stochastic subgradient methods under heavy-tailed gradient noise.
//!
//! This crate implements projected clipped SGD and clipped mirror descent for
//! nonsmooth convex objectives whose stochastic subgradient noise has only a
//! bounded p-th moment, `p` in `(1, 2]`. Gradient clipping with a properly
//! scheduled threshold restores the convergence rates that plain SGD loses
//! once the noise variance is infinite.
//!
//! The crate is organized bottom-up:
//!
//! * [`linalg`] — small dense-vector helpers (norms, compensated sums).
//! * [`noise`] — calibrated heavy-tailed noise oracles with known moments.
//! * [`problems`] — nonsmooth convex test objectives with exact optima and
//!   projection / mirror-step oracles for their feasible sets.
//! * [`clip`] — the clipping operator and Monte Carlo verification of the
//!   moment bounds it induces.
//! * [`schedules`] — joint step-size / clipping-threshold schedules, including
//!   a distance-adaptive variant that needs no knowledge of the initial
//!   distance to the optimum.
//! * [`optimizer`] — the simulation loops tying the above together, with
//!   deterministic seeded streams so every run is exactly reproducible.
//! * [`experiments`] — config files, seed sweeps, rate fitting, persistence.
//!
//! Everything downstream of a `(master_seed, run_seed)` pair is bitwise
//! deterministic, independent of thread count.

pub mod clip;
pub mod experiments;
pub mod linalg;
pub mod noise;
pub mod optimizer;
pub mod problems;
pub mod schedules;

/// Crate-wide error type.
///
/// Construction-time validation lives here; numerical routines prefer to be
/// total and instead document their domain.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A parameter failed validation at construction time.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter {
        /// Name of the offending parameter.
        name: &'static str,
        /// Human-readable explanation of the constraint that failed.
        reason: String,
    },

    /// Two components that must agree were configured inconsistently.
    #[error("incompatible configuration: {0}")]
    Incompatible(String),

    /// A config file could not be parsed.
    #[error("config parse error: {0}")]
    ConfigParse(String),

    /// Filesystem trouble while reading or writing experiment artifacts.
    #[error("io error on `{path}`: {source}")]
    Io {
        /// Path involved in the failed operation.
        path: String,
        /// Underlying error.
        #[source]
        source: std::io::Error,
    },

    /// A statistical routine was handed too little data.
    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Shorthand for [`Error::InvalidParameter`].
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
