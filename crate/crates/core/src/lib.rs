//! Construction and numerical certification of a calibrated minimal surface
//! obtained by desingularizing the self-intersections of a holomorphic curve.
//!
//! The pipeline builds a holomorphic seed surface whose self-intersections
//! accumulate toward the boundary, replaces a finite number of them by
//! embedded necks, glues a closed 2-form that agrees with the standard
//! symplectic form away from the necks, and synthesizes a compatible metric
//! and almost complex structure for which the surface is calibrated.  Every
//! analytic claim the construction relies on is re-checked numerically and
//! reported as a named certificate.

pub mod jet;
pub mod linalg;
pub mod cjet;
pub mod chart;
pub mod bump;
pub mod config;
pub mod quad;
pub mod forms;
pub mod glue;
pub mod kahler;
pub mod slitplane;
pub mod assemble;

pub use config::{Config, Variant};

/// Errors surfaced by construction and certification.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Two sheets meet at an angle too shallow to desingularize.
    #[error("tangent planes at singular point #{index} separated by {separation:.3e} < {min:.3e}")]
    NonTransversal {
        index: usize,
        separation: f64,
        min: f64,
    },

    #[error("Newton iteration did not converge: {0}")]
    NewtonDiverged(String),

    /// The 2-form fails nondegeneracy where a metric is being synthesized.
    #[error("metric synthesis failed: {0}")]
    Degenerate(String),

    /// No admissible neck scale satisfies the smallness budgets.
    #[error("neck scheduling failed: {0}")]
    Schedule(String),

    #[error("not supported: {0}")]
    NotSupported(String),

    /// A certificate that is a hard precondition for later stages failed.
    #[error("certificate {name} failed: residual {residual:.3e} exceeds {tol:.3e}")]
    Certificate {
        name: String,
        residual: f64,
        tol: f64,
    },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
