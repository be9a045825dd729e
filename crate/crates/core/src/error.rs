use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A caller-supplied argument violates an operation precondition.
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("shape mismatch: expected nmax = {expected}, found nmax = {found}")]
    ShapeMismatch { expected: usize, found: usize },

    #[error("grid of {count} points cannot resolve modes up to n = {nmax} (need at least {required})")]
    Resolution {
        count: usize,
        nmax: usize,
        required: usize,
    },

    #[error("non-finite value produced by {0}")]
    NonFinite(String),

    #[error("cannot normalize a zero-norm state")]
    ZeroNorm,

    #[error("cavity validity violated: {inequality} (value {value:.4e}, limit {limit:.4e})")]
    Validity {
        inequality: String,
        value: f64,
        limit: f64,
    },

    #[error("integrator failure: norm drift {drift:.3e} exceeds {limit:.1e} after {steps} steps")]
    IntegratorFailure { drift: f64, steps: usize, limit: f64 },

    #[error("frame {frame} has no nodal line in Re(psi)")]
    NoNode { frame: usize },

    #[error("antenna site ({x}, {y}) lies outside the field domain")]
    OutsideDomain { x: f64, y: f64 },

    #[error("ill-posed sample plan ({plan}): design-matrix condition number {condition:.3e} exceeds {limit:.0e}")]
    IllPosed {
        plan: String,
        condition: f64,
        limit: f64,
    },
}
