use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("NonHermitian: matrix deviates from its adjoint by {deviation:e}")]
    NonHermitian { deviation: f64 },

    #[error("BadDimension: {0} is not a power of two (or exceeds the supported size)")]
    BadDimension(usize),

    #[error("SizeMismatch: expected {expected} qubits, found {found}")]
    SizeMismatch { expected: usize, found: usize },

    #[error("TableTooLarge: structure tables are limited to 4 qubits, requested {0}")]
    TableTooLarge(usize),

    #[error("invalid Pauli notation: {0}")]
    Parse(String),

    #[error("AsymmetricGenerator: generator {generator} has odd Y-parity and cannot use the reversed-order shortcut")]
    AsymmetricGenerator { generator: String },

    #[error("layer index {index} out of range 1..={max}")]
    LayerOutOfRange { index: usize, max: usize },

    #[error("unknown builtin ansatz '{0}'")]
    UnknownAnsatz(String),

    #[error("OnlyTwoQubits: the reduced-circuit scheme needs exactly 2 qubits, got {0}")]
    OnlyTwoQubits(usize),

    #[error("BadEffectiveOperator: {0}")]
    BadEffectiveOperator(String),

    #[error("NotAProjector: P^2 - P has norm {0:e}")]
    NotAProjector(f64),

    #[error("NumericalBreakdown at step {step}: {reason}")]
    NumericalBreakdown { step: usize, reason: String },

    #[error("circuit strategies need U0 as a gate sequence, but the ansatz carries a dense U0")]
    NonCircuitU0,

    #[error("invalid argument: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
