use thiserror::Error;

/// Errors raised by the channel-flow library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain too short: T = {t} but T >= L + 1 = {required} is required")]
    DomainTooShort { t: f64, required: f64 },
    #[error("degenerate geometry: {0}")]
    Geometry(String),
    #[error("invalid interval ({a}, {b}): a < b is required")]
    InvalidInterval { a: f64, b: f64 },
    #[error("point ({x1}, {x2}) lies outside the channel closure")]
    OutsideDomain { x1: f64, x2: f64 },
    #[error("argument out of domain: {0}")]
    Domain(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("layout mismatch: {0}")]
    LayoutMismatch(String),
    #[error("solver breakdown: {message} (residual history {residuals:?})")]
    SolverBreakdown { message: String, residuals: Vec<f64> },
    #[error("no convergence after {iterations} iterations (increments {increments:?})")]
    NonConvergence {
        iterations: usize,
        increments: Vec<f64>,
    },
    #[error("eigensolver stagnation after {iterations} iterations (estimates {history:?})")]
    EigenStagnation { iterations: usize, history: Vec<f64> },
    #[error("constraint leak: {0}")]
    ConstraintLeak(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
