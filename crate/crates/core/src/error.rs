use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not positive semi-definite (min eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },
    #[error("transform is singular (|det| = {det:e})")]
    SingularTransform { det: f64 },
    #[error("operation `{op}` does not support domain `{domain}`")]
    UnsupportedDomain { op: &'static str, domain: String },
    #[error("domain mismatch: {0}")]
    DomainMismatch(String),
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("negative entry {value:e} in function {index} at sample {cell}")]
    NegativeEntry { index: usize, cell: usize, value: f64 },
    #[error("S + Hess(psi) is not convex at cell {cell} (min eigenvalue {min_eigenvalue:e})")]
    NotConvex { cell: usize, min_eigenvalue: f64 },
    #[error("laminate states are not rank-one compatible: |(C - B) xi| = {residual:e}")]
    IncompatiblePair { residual: f64 },
    #[error("negative density {value:e} at cell {cell}")]
    NegativeDensity { cell: usize, value: f64 },
    #[error("negative pressure {value:e} at cell {cell}")]
    NegativePressure { cell: usize, value: f64 },
    #[error("negative distribution value {value:e} at cell {cell}, node {node}")]
    NegativeDistribution { cell: usize, node: usize, value: f64 },
    #[error("velocity {speed} reaches the speed of light {c}")]
    SuperluminalVelocity { speed: f64, c: f64 },
    #[error("normal trace unavailable: {0}")]
    TraceUnavailable(String),
    #[error("direction is not singular: det = {det:e}")]
    NotSingularDirection { det: f64 },
    #[error("field differs from the reference value within the boundary margin (cell {cell})")]
    SupportTouchesBoundary { cell: usize },
    #[error("compatibility violated: mean of f is {mean_f}, det S is {det_s}")]
    CompatibilityViolated { mean_f: f64, det_s: f64 },
    #[error("line search could not keep the iterate convex (step {step:e})")]
    NotConvexIterate { step: f64 },
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    MaxIterations { iterations: usize, residual: f64 },
    #[error("matrix A+ is singular (det = {det:e})")]
    SingularAPlus { det: f64 },
    #[error("lattice basis is singular (det = {det:e})")]
    SingularLattice { det: f64 },
    #[error("CFL number {cfl} outside the admissible range (0, {max}]")]
    CflViolation { cfl: f64, max: f64 },
    #[error("vacuum breakdown at cell {cell}: {reason}")]
    VacuumBreakdown { cell: usize, reason: String },
    #[error("relaxation time must be positive, got {tau}")]
    NegativeRelaxation { tau: f64 },
    #[error("enumeration of {tuples} tuples exceeds the budget {budget}")]
    BudgetExceeded { tuples: u128, budget: u128 },
    #[error("field is not uniformly elliptic (min eigenvalue {alpha:e})")]
    NotElliptic { alpha: f64 },
    #[error("iterative solver diverged: {0}")]
    SolverDiverged(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("suite configuration has no `jobs` list")]
    MissingJobs,
    #[error("unknown key `{key}` in {context}")]
    UnknownKey { key: String, context: String },
    #[error("unknown operation `{module}.{operation}`")]
    UnknownOperation { module: String, operation: String },
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
