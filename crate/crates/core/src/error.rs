use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("tensor order {order} outside 1..={degree}")]
    OrderOutOfRange { order: usize, degree: usize },
    #[error("covariance is not symmetric positive definite")]
    NotPositiveDefinite,
    #[error("Jacobian vanishes while the constraint value does not")]
    ZeroJacobian,
    #[error("normal matrix J Sigma J^T is singular or ill-conditioned (cond {cond:.3e})")]
    SingularNormalMatrix { cond: f64 },
    #[error("constraint value is not in the range of the Jacobian (residual {residual:.3e})")]
    InfeasibleLinearization { residual: f64 },
    #[error("negative discriminant: no quadratic certificate")]
    NegativeDiscriminant,
    #[error("Jacobian is rank deficient")]
    RankDeficient,
    #[error("numerical rank of the Jacobian changes near the evaluation point")]
    RankCollapse,
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("conic has an empty real locus")]
    EmptyConic,
    #[error("F must have rank exactly two")]
    RankDeficientF,
    #[error("measurement coincides with an epipole")]
    EpipoleAtPoint,
    #[error("translation is zero")]
    ZeroTranslation,
    #[error("point lies at the camera center")]
    PointAtCamera,
    #[error("degenerate camera frame")]
    DegenerateFrame,
    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(String),
    #[error("non-finite residual at iteration {iteration}")]
    NonFiniteResidual { iteration: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
