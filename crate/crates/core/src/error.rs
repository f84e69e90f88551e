use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("qubit count mismatch: {left} vs {right}")]
    QubitMismatch { left: usize, right: usize },

    #[error("register of {n} qubits exceeds the dense limit of {limit}")]
    DenseLimit { n: usize, limit: usize },

    #[error("determinant basis of size {size} exceeds the dense limit of {limit}")]
    BasisTooLarge { size: usize, limit: usize },

    #[error("FCIDUMP line {line}: {msg}")]
    Fcidump { line: usize, msg: String },

    #[error("invalid Pauli text on line {line}: {msg}")]
    PauliText { line: usize, msg: String },

    #[error("impossible sector: {0}")]
    EmptySector(String),

    #[error("invalid mapping: {0}")]
    Mapping(String),

    #[error("operator does not commute with the tapered symmetries: {0}")]
    Symmetry(String),

    #[error("invalid circuit: {0}")]
    Circuit(String),

    #[error("unbound parameter slot {0}")]
    UnboundParameter(usize),

    #[error("invalid noise model: {0}")]
    Noise(String),

    #[error("all {shots} shots of measurement group {group} were discarded by post-selection")]
    AllShotsDiscarded { group: usize, shots: u64 },

    #[error("post-selection requested on a non-diagonal measurement group")]
    NonDiagonalPostSelection,

    #[error("matrix is singular or ill-conditioned (condition number {0:e})")]
    Singular(f64),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("every overlap eigenvalue is below the threshold {0:e}")]
    EmptySubspace(f64),

    #[error("Hamiltonian matrix is not Hermitian (max asymmetry {0:e})")]
    NotHermitian(f64),

    #[error("unknown fixture `{0}`")]
    UnknownFixture(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
