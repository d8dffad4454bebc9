use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid layout: {0}")]
    InvalidLayout(String),
    #[error("gate validation failed: {0}")]
    GateValidation(String),
    #[error("qubit index {index} out of range for {n_qubits} qubits")]
    IndexOutOfRange { index: usize, n_qubits: usize },
    #[error("branch probability {prob:e} is below the probability floor")]
    ZeroProbabilityBranch { prob: f64 },
    #[error("capacity exceeded: {what} needs {requested} qubits, cap is {cap}")]
    Capacity {
        what: &'static str,
        requested: usize,
        cap: usize,
    },
    #[error("arity mismatch: expected {expected} values, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("invalid period {period} for a circuit on {n_qubits} qubits")]
    InvalidPeriod { period: usize, n_qubits: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("policy initialization error: {0}")]
    Initialization(String),
    #[error("invalid protocol specification: {0}")]
    InvalidSpec(String),
    #[error("infeasible entropy {s0} bits for {n_qubits} qubits")]
    InfeasibleEntropy { s0: f64, n_qubits: usize },
    #[error("numeric abort: {0}")]
    NumericAbort(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
