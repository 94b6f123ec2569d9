use thiserror::Error;

/// Errors raised by mesh construction, assembly and the linear solver.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid breakpoints: {0}")]
    Breakpoints(String),

    #[error("mesh is not fitted to {what}: line {coord} is not a mesh facet line")]
    NotFitted { what: String, coord: f64 },

    #[error("region {0} is not tagged on this mesh")]
    MissingRegion(&'static str),

    #[error("region {0} contains no cells")]
    EmptyRegion(&'static str),

    #[error("derivative order {order} exceeds polynomial degree {degree}")]
    DerivativeOrder { order: usize, degree: usize },

    #[error("unsupported polynomial degree {0} (expected 1..=3)")]
    Degree(usize),

    #[error("jump order {order} not available for degree {degree}")]
    JumpOrder { order: usize, degree: usize },

    #[error("discontinuous {0} model evaluated without a cell side")]
    MissingSide(&'static str),

    #[error("invalid stabilization parameters: {0}")]
    Params(String),

    #[error("perturbed data requested without a noise specification")]
    MissingNoise,

    #[error("no data dofs available for perturbation")]
    EmptyDataDofs,

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
