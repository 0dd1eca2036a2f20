use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("grid size {0} must be even and at least 8")]
    BadGridSize(usize),
    #[error("complex dimension {0} not supported (expected 1 or 2)")]
    BadDimension(usize),
    #[error("axis index {axis} out of range for complex dimension {n}")]
    AxisOutOfRange { axis: usize, n: usize },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("metric is not positive definite at point {point} (smallest eigenvalue {min_eig:e})")]
    NotPositive { point: usize, min_eig: f64 },
    #[error("metric matrix is singular at point {point}")]
    Singular { point: usize },
    #[error("determinant is not positive at point {point}")]
    NonPositiveDet { point: usize },
    #[error("at least {needed} resolutions are required, got {got}")]
    TooFewResolutions { needed: usize, got: usize },
    #[error("time step {dt:e} exceeds the stability bound {dt_max:e}")]
    StepTooLarge { dt: f64, dt_max: f64 },
    #[error("positivity lost at t = {t} (point {point})")]
    Breakdown { t: f64, point: usize },
    #[error("sample budget must be at least 1")]
    EmptyBudget,
    #[error("kappa = {0} outside (0, 1/8)")]
    KappaOutOfRange(f64),
    #[error("profile needs at least {min} nodes, got {got}")]
    TooFewNodes { min: usize, got: usize },
    #[error("cutoff derivative bound violated: max phi' = {max_dphi} > 2/kappa^2 = {bound}")]
    MollifierBound { max_dphi: f64, bound: f64 },
    #[error("no admissible tau found at s = {0}")]
    NoTau(f64),
    #[error("invalid argument: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
