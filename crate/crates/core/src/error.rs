use thiserror::Error;

pub type Result<T> = std::result::Result<T, QsvtError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QsvtError {
    #[error("{requested} qubits exceed the simulator budget of {budget}")]
    QubitBudgetExceeded { requested: usize, budget: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("input vector is not normalized (norm^2 = {norm_sqr})")]
    NotNormalized { norm_sqr: f64 },

    #[error("matrix is not unitary (max deviation {deviation:e})")]
    NotUnitary { deviation: f64 },

    #[error("matrix is not Hermitian (max deviation {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("invalid qubit targets: {0}")]
    InvalidTargets(String),

    #[error("control qubit {0} is also a target")]
    ControlOverlap(usize),

    #[error("oracle map is not injective: label {label} has two preimages")]
    NotInjective { label: usize },

    #[error("label {label} is out of range for a {width}-qubit register")]
    LabelOutOfRange { label: usize, width: usize },

    #[error("qubits outside the loaded register are not in |0>")]
    RegisterNotCleared,

    #[error("post-selection probability {probability:e} is below the floor; spectrum is fully thresholded")]
    FullyThresholded { probability: f64 },

    #[error("matrix is zero or empty")]
    ZeroMatrix,

    #[error("matrix contains non-finite entries")]
    NonFiniteInput,

    #[error("degenerate singular values {first} and {second} (relative gap below 1e-9)")]
    DegenerateSpectrum { first: f64, second: f64 },

    #[error("threshold tau = {tau} is outside (0, sigma_1 = {sigma_max})")]
    ThresholdOutOfRange { tau: f64, sigma_max: f64 },

    #[error("all weights are zero")]
    ZeroWeights,

    #[error("eigenvalues {first} and {second} collide on register label {label}")]
    LabelCollision {
        first: f64,
        second: f64,
        label: usize,
    },

    #[error("invalid eigenvalue input: {0}")]
    InvalidEigenvalues(String),

    #[error("Newton iteration did not converge for register label {label} (sigma^2 = {sigma_sq})")]
    NewtonDiverged { label: usize, sigma_sq: f64 },

    #[error("ancilla qubit is not in |0>")]
    AncillaNotCleared,

    #[error("uncompute left residual mass {residual:e} outside L = C = 0")]
    ResidualMass { residual: f64 },

    #[error("degenerate spectrum profile: {0}")]
    DegenerateProfile(String),

    #[error("Taylor-4 discriminant is negative ({discriminant:e})")]
    NegativeDiscriminant { discriminant: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("I/O error: {0}")]
    Io(String),
}

impl From<std::io::Error> for QsvtError {
    fn from(e: std::io::Error) -> Self {
        QsvtError::Io(e.to_string())
    }
}

impl QsvtError {
    /// Process exit code: 2 for invalid input, 3 for numerical guards, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        use QsvtError::*;
        match self {
            NewtonDiverged { .. }
            | ResidualMass { .. }
            | NotUnitary { .. }
            | FullyThresholded { .. } => 3,
            Io(_) => 1,
            _ => 2,
        }
    }
}
