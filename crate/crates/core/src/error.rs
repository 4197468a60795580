use thiserror::Error;

/// Errors raised by the simulation and analysis routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid chain parameters: {0}")]
    InvalidParams(String),

    #[error("chain of {n} qubits exceeds the dimension cap of {cap} qubits")]
    DimensionOverflow { n: usize, cap: usize },

    #[error("dimensionless time s = {0} is outside [0, 1]")]
    OutOfRange(f64),

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("matrix is not Hermitian (entry ({row}, {col}) off by {defect:e})")]
    NotHermitian { row: usize, col: usize, defect: f64 },

    #[error("requested {k} levels from a matrix of dimension {dim}")]
    InvalidLevelCount { k: usize, dim: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("eigenvector tracking failed at level {level}: overlap {overlap:.3}")]
    TrackingFailure { level: usize, overlap: f64 },

    #[error("ground state is degenerate at s = {s} (gap {gap:e})")]
    DegenerateGap { s: f64, gap: f64 },

    #[error("propagation did not converge within {max_steps} steps (best P_S = {best})")]
    NotConverged { max_steps: usize, best: f64 },

    #[error("fidelity target {target} unreachable below t_f = {cap} ns")]
    TargetUnreachable { target: f64, cap: f64 },

    #[error("invalid disorder specification: {0}")]
    InvalidDisorder(String),

    #[error("singular C3 denominator at s = {s} for pair ({m}, {n})")]
    SingularPoint { s: f64, m: usize, n: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("{0}")]
    Precondition(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
