use thiserror::Error;

/// Errors raised by network construction, the dynamics engine and the
/// steady-state solvers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is empty")]
    Empty,

    #[error("entry ({row}, {col}) = {value} is negative or not finite")]
    InvalidEntry { row: usize, col: usize, value: f64 },

    #[error("row {row} has no positive entry")]
    ZeroRow { row: usize },

    #[error("row {row} sums to {sum}, expected 1")]
    RowSum { row: usize, sum: f64 },

    #[error("conformity weight pattern differs from influence pattern at ({row}, {col})")]
    SparsityMismatch { row: usize, col: usize },

    #[error("dimension mismatch: expected {expected}, got {found} ({what})")]
    Dimension {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("infeasible regular graph: n = {n}, k = {k}")]
    InfeasibleRegular { n: usize, k: usize },

    #[error("could not generate a strongly connected graph after {attempts} attempts")]
    ConnectivityBudget { attempts: usize },

    #[error("{name}[{index}] = {value} is outside {range}")]
    Parameter {
        name: &'static str,
        index: usize,
        value: f64,
        range: &'static str,
    },

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("threshold model requires per-agent thresholds")]
    MissingThresholds,

    #[error("threshold model requires opinions in [0, 1]; agent {index} has {value}")]
    OpinionScale { index: usize, value: f64 },

    #[error("assumption violated: {0}")]
    Assumption(#[from] AssumptionViolation),

    #[error("singular linear system while computing {what}")]
    Singular { what: &'static str },

    #[error("numerical conditioning failure in {what}: row {row} {detail}")]
    Conditioning {
        what: &'static str,
        row: usize,
        detail: String,
    },

    #[error("eigenvalue iteration did not converge after {iterations} iterations")]
    EigenNonConvergence { iterations: usize },

    #[error("{0}")]
    Precondition(String),

    #[error("agent index {index} out of range for {n} agents")]
    AgentIndex { index: usize, n: usize },

    #[error("input format: {0}")]
    Format(String),
}

/// Structured reason why the convergence hypotheses do not hold for an
/// instance.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssumptionViolation {
    #[error("influence graph is not strongly connected")]
    NotStronglyConnected,
    #[error("influence graph is periodic")]
    Periodic,
    #[error("susceptibility lambda[{index}] = {value} is not in the open interval (0, 1)")]
    Susceptibility { index: usize, value: f64 },
    #[error("resilience phi[{index}] = {value} is not in the open interval (0, 1)")]
    Resilience { index: usize, value: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
