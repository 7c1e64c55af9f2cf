use thiserror::Error;

/// Errors surfaced by the library.
///
/// Iteration limits are deliberately not errors: Sinkhorn routines return
/// their best iterate with `converged == false` instead.
#[derive(Debug, Error)]
pub enum Error {
    #[error("image is entirely black (zero total intensity)")]
    AllBlackImage,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("empty sample")]
    EmptySample,

    #[error("problem size {rows} x {cols} exceeds the cap of {cap} matrix entries")]
    SizeCapExceeded { rows: usize, cols: usize, cap: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("Sinkhorn denominator underflowed to a subnormal; lambda is too large for the dense path")]
    NumericalUnderflow,

    #[error("plan mismatch: {0}")]
    PlanMismatch(String),

    #[error("invalid kernel geometry: {0}")]
    Geometry(String),

    #[error("unsupported cost order r = {0}; fast summation supports r in {{1, 2}}")]
    UnsupportedOrder(f64),

    #[error("point outside the configured geometry box: {0}")]
    GeometryViolation(String),

    #[error("non-positive denominator {value:e} in NFFT Sinkhorn (threshold {threshold:e}); the fast-summation bandwidth is too low for the requested lambda")]
    NonPositiveDenominator { value: f64, threshold: f64 },

    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path}: {msg}")]
    Parse { path: String, msg: String },
}

pub type Result<V> = std::result::Result<V, Error>;

impl Error {
    /// True for failures of the numerics themselves (as opposed to bad
    /// inputs); the CLI maps these to a distinct exit code.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NumericalUnderflow | Error::NonPositiveDenominator { .. }
        )
    }
}
