use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite matrix entry")]
    NonFinite,
    #[error("singular matrix (pivot {pivot:.3e} below threshold {threshold:.3e})")]
    SingularMatrix { pivot: f64, threshold: f64 },
    #[error("eigenvalue iteration did not converge after {0} iterations")]
    NoConvergence(usize),
    #[error("matrix is not Hermitian (asymmetry {0:.3e})")]
    NotHermitian(f64),
    #[error("basis is empty or spans only the zero matrix")]
    EmptyBasis,
    #[error("C·B_P is singular: actuation assumption violated")]
    SingularActuation,
    #[error("unsupported deformation: {0}")]
    UnsupportedDeformation(String),
    #[error("‖A_P − B_P K‖_op = {0:.6} is not below 1")]
    KStrongViolated(f64),
    #[error("switching gain too large: ρ‖CB_P‖_op = {lhs:.6} exceeds φ − α₀ = {rhs:.6}")]
    RhoTooLarge { lhs: f64, rhs: f64 },
    #[error("boundary layer too thin: φ = {phi:.6} ≤ α₀ = {alpha0:.6}")]
    PhiTooSmall { phi: f64, alpha0: f64 },
    #[error("LMI infeasible (best max eigenvalue {0:.3e})")]
    Infeasible(f64),
    #[error("numerical failure in LMI solver: {0}")]
    NumericalFailure(String),
    #[error("history has {got} states, expected {expected}")]
    HistoryLengthMismatch { expected: usize, got: usize },
    #[error("history has {got} states, need at least {needed}")]
    HistoryTooShort { needed: usize, got: usize },
    #[error("disturbance norm {norm:.6} exceeds δ_max = {max:.6}")]
    DisturbanceTooLarge { norm: f64, max: f64 },
    #[error("saturation width φ must be positive, got {0}")]
    NonpositivePhi(f64),
    #[error("Lyapunov decrease check requires a reduced-mode trajectory")]
    ModeMismatch,
    #[error("config error: {0}")]
    Config(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("design step ({step}) failed: {source}")]
    DesignStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },
}

pub(crate) fn dim_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::DimensionMismatch(msg.into()))
}
