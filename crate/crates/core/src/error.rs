use thiserror::Error;

/// Errors raised across the workbench.
#[derive(Debug, Error)]
pub enum Error {
    #[error("qubit count mismatch: expected {expected}, found {found}")]
    QubitMismatch { expected: usize, found: usize },

    #[error("qubit index {index} out of range for {num_qubits} qubits")]
    QubitOutOfRange { index: usize, num_qubits: usize },

    #[error("control and target must differ (both {0})")]
    SameControlTarget(usize),

    #[error("Pauli string is not Hermitian (phase must be +1 or -1)")]
    NonHermitian,

    #[error("expectation has imaginary part {0:e}; operator is not Hermitian")]
    ImaginaryExpectation(f64),

    #[error("{num_qubits} qubits exceeds the dense budget of {budget}")]
    TooLarge { num_qubits: usize, budget: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parameter count mismatch: design has {expected} free parameters, got {found}")]
    ParamMismatch { expected: usize, found: usize },

    #[error("eigensolver did not converge")]
    NoConvergence,

    #[error("basis is not orthonormal (deviation {0:e})")]
    NotOrthonormal(f64),

    #[error("subspace leak {0:e}: the ansatz does not preserve the subspace")]
    SubspaceLeak(f64),

    #[error("training diverged at iteration {iteration}: loss = {loss}")]
    Diverged { iteration: usize, loss: f64 },

    #[error("insufficient data for decay fit: {0}")]
    InsufficientWindow(String),

    #[error("automorphism search budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
