//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("qubit index {qubit} out of range for {n_qubits} qubits")]
    QubitOutOfRange { qubit: usize, n_qubits: usize },

    #[error("qubit index {qubit} listed more than once")]
    DuplicateQubit { qubit: usize },

    #[error("{requested} qubits requested; supported range is {min}..={max}")]
    QubitCountOutOfRange {
        requested: usize,
        min: usize,
        max: usize,
    },

    #[error("{name} = {value} outside [{min}, {max}]")]
    ParameterOutOfRange {
        name: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },

    #[error("state vector has (near-)zero norm")]
    ZeroNorm,

    #[error("operator is not Hermitian (max deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("operator is not an orthogonal projector (max |P^2 - P| = {deviation:.3e})")]
    NotAProjector { deviation: f64 },

    #[error("invalid density matrix: {reason}")]
    InvalidDensityMatrix { reason: String },

    #[error("incompatible projection: probability {probability:.3e} below threshold")]
    IncompatibleProjection { probability: f64 },

    #[error("postselection never succeeds: probability {probability:.3e}")]
    PostselectionFailed { probability: f64 },

    #[error("duplicate port label '{0}' in postselection rule")]
    DuplicatePort(String),

    #[error(
        "measurement set is not informationally complete (operator-span rank {rank} < {required})"
    )]
    NotInformationallyComplete { rank: usize, required: usize },

    #[error("low statistics: {context}")]
    LowStatistics { context: String },

    #[error("no white-noise violation threshold: functional value on the target state is {i_value} <= 0")]
    NoViolationThreshold { i_value: f64 },

    #[error("detector efficiencies required but not provided")]
    MissingEfficiencies,

    #[error("missing measurement data: {context}")]
    MissingData { context: String },

    #[error("bootstrap resample {index} failed: {source}")]
    BootstrapResample {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("malformed input: {context}")]
    MalformedInput { context: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
