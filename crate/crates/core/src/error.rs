use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("qubit count {0} outside supported range 1..=24")]
    QubitCount(usize),
    #[error("qubit index {index} out of range for {n_qubits}-qubit register")]
    QubitOutOfRange { index: usize, n_qubits: usize },
    #[error("gate {gate} uses qubit {qubit} more than once")]
    RepeatedQubit { gate: &'static str, qubit: usize },
    #[error("gate {gate} has non-finite angle {angle}")]
    NonFiniteAngle { gate: &'static str, angle: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("gate {index}: {message}")]
    InvalidGate { index: usize, message: String },
    #[error("gate {index}: {kind} is not in the Clifford+T set {{X, Z, H, S, T, CNOT}}")]
    NotCliffordT { index: usize, kind: &'static str },
    #[error("shot count must be at least 1")]
    ZeroShots,
    #[error("measurement selected a zero-probability branch")]
    DegenerateBranch,
    #[error("key-update step {0} is not a Clifford step")]
    NotCliffordStep(String),
    #[error("Bell register is not in |00> before a T gadget")]
    AncillaNotReset,
    #[error("Bell outcome count {found} does not match program T-count {expected}")]
    BellLengthMismatch { expected: usize, found: usize },
    #[error("malformed key-update program: {0}")]
    MalformedProgram(String),
    #[error(
        "synthesis of R_Z({theta}) did not reach epsilon {epsilon} within depth {depth} \
         (best distance found {best})"
    )]
    SynthesisExhausted {
        theta: f64,
        epsilon: f64,
        depth: usize,
        best: f64,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("non-finite gradient component {index}")]
    NonFiniteGradient { index: usize },
    #[error("csv row {row}, column {column}: {message}")]
    Csv {
        row: usize,
        column: usize,
        message: String,
    },
    #[error("idx file at offset {offset}: {message}")]
    Idx { offset: usize, message: String },
    #[error("training failed at iteration {iteration}: {source}")]
    Training {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
