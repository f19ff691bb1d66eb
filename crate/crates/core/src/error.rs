use thiserror::Error;

/// Errors raised by kernel construction, geometry and the LP-backed oracles.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix must be square, got {rows}x{cols}")]
    NonSquare { rows: usize, cols: usize },

    #[error("discretization order too low: |A|*delta/(zeta+2) = {ratio:.4} >= 1; raise zeta or shrink delta")]
    OrderTooLow { ratio: f64 },

    #[error("discretization error bound blew up at step {step} ({value:e}); raise zeta")]
    BoundBlowup { step: usize, value: f64 },

    /// An eroded constraint set is empty; `step` is the sampling step when known.
    #[error("eroded constraint set is empty{}", match .step { Some(k) => format!(" at step {k}"), None => String::new() })]
    EmptyErosion { step: Option<usize> },

    #[error("ray origin lies outside the polytope")]
    OriginOutside,

    #[error("set is unbounded along the requested direction")]
    Unbounded,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("anchor point is not feasible")]
    InfeasibleAnchor,

    #[error("LP solver failure: {0}")]
    LpNumericalFailure(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("sampler mode {0} needs an over-approximation")]
    MissingOverApproximation(&'static str),

    #[error("negative vMF concentration {0}")]
    NegativeConcentration(f64),
}

pub type Result<T> = std::result::Result<T, Error>;
