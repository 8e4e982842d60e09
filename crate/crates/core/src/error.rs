use alloc::string::String;

/// Errors reported by every fallible operation in the crate.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("site {site} outside 1..={n}")]
    SiteOutOfRange { site: usize, n: usize },
    #[error("index {index} outside 1..={max}")]
    IndexOutOfRange { index: u64, max: u64 },
    #[error("lattice size {n} exceeds the exact-route cap {cap}")]
    TooManySites { n: usize, cap: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("generator has {0} closed classes; stationary law is not unique")]
    MultipleClosedClasses(usize),
    #[error("singular linear system: {0}")]
    Singular(String),
    #[error("tail mass {tail:e} above tolerance {tol:e} at sink cap {cap}")]
    TailTooLarge { tail: f64, tol: f64, cap: usize },
    #[error("window too small: {0}")]
    WindowTooSmall(String),
    #[error("negative time {0}")]
    NegativeTime(f64),
    #[error("duality hypotheses violated: {0}")]
    HypothesisViolated(String),
    #[error("quadrature did not reach tolerance: {0}")]
    Quadrature(String),
    #[error("step budget of {0} events exceeded")]
    StepBudget(u64),
    #[error("degenerate configuration: {0}")]
    Degenerate(String),
}

pub type Result<T> = core::result::Result<T, Error>;
