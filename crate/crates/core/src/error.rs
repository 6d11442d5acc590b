use thiserror::Error;

/// Errors surfaced by the numerical operations.
///
/// Numerical failures are reported, never silently patched: a holonomy limit
/// that does not satisfy the Cauchy criterion, a flag intersection that is
/// ill-conditioned, or a subspace pair that is not transverse all come back
/// as dedicated variants.
#[derive(Debug, Error)]
pub enum CocycleError {
    #[error("precondition violated: {0}")]
    PreconditionViolation(String),
    #[error("homoclinic core word must be nonempty")]
    EmptyCore,
    #[error("matrix numerically singular: {0}")]
    SingularValue(String),
    #[error("limit failed Cauchy criterion after {n_max} steps (last increment {last_delta:.3e})")]
    NoConvergence { n_max: usize, last_delta: f64 },
    #[error("Oseledets flag intersection degenerate: {0}")]
    DegenerateSplit(String),
    #[error("subspaces not transverse (margin {margin:.3e})")]
    NonTransverse { margin: f64 },
    #[error("rank mismatch: expected {expected}, got {got}")]
    RankMismatch { expected: usize, got: usize },
    #[error("eccentricity {got:.3e} below required {required:.3e}")]
    InsufficientEccentricity { got: f64, required: f64 },
    #[error("subspace meets the numerical kernel of the quasi-projective map")]
    KernelHit,
    #[error("cannot normalize the zero matrix")]
    ZeroMatrix,
    #[error("orbit never returned to the region within {0} steps")]
    NoReturns(usize),
    #[error("minor {0} of id+R vanishes (|m| = {1:.3e})")]
    MinorVanishes(String, f64),
    #[error("eigenvalue moduli admit an integer relation {0:?} (residual {1:.3e})")]
    ResonantEigenvalues(Vec<i32>, f64),
    #[error("bump radius {r} too large: orbit of the bump center re-enters the ball (min shifted distance {min_dist:.3e})")]
    BumpOverlap { r: f64, min_dist: f64 },
    #[error("unsupported fiber family for this operation: {0}")]
    UnsupportedFamily(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, CocycleError>;
