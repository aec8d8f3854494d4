//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Amplitude encoding and cosine similarity are undefined at zero norm.
    #[error("zero-norm vector cannot be amplitude encoded")]
    ZeroNorm,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("qubit index {index} out of range for {num_qubits}-qubit register")]
    IndexOutOfRange { index: usize, num_qubits: usize },

    #[error("duplicate qubit index {0}")]
    DuplicateIndex(usize),

    #[error("partial trace requires a non-empty set of kept qubits")]
    EmptyKeepSet,

    #[error("simulating {requested} qubits exceeds the configured cap of {max}")]
    RegisterTooLarge { requested: usize, max: usize },

    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),

    #[error("epsilon must lie in (0, 1), got {0}")]
    InvalidEpsilon(f64),

    #[error("probability {0} outside [0, 1]")]
    InvalidProbability(f64),

    #[error("efficiency {0} outside [0, 1]")]
    InvalidEfficiency(f64),

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    /// Raised when an input or weight piece has zero norm and padding cannot
    /// repair it; `index` is the piece position within the partition.
    #[error("piece {index} has zero norm")]
    ZeroNormPiece { index: usize },

    #[error("topology mismatch: operation requires {expected}, spec is {actual}")]
    TopologyMismatch {
        expected: &'static str,
        actual: &'static str,
    },

    #[error("invalid network spec: {0}")]
    InvalidSpec(String),

    #[error("invalid protocol config: {0}")]
    InvalidConfig(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("training loss became non-finite at epoch {epoch}")]
    DivergenceDetected { epoch: usize },
}
