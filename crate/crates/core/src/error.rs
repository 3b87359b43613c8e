use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid nonlinearity: {0}")]
    InvalidNonlinearity(String),

    #[error("phi is only defined on (-1, 1), got {0}")]
    PhiDomain(f64),

    #[error("right-hand side evaluated at the singular point r = 0; start from the Taylor expansion")]
    SingularPoint,

    #[error("integration stopped after {steps} steps at r = {r}")]
    StepBudget { steps: usize, r: f64 },

    #[error("step size underflow at r = {r}")]
    StepUnderflow { r: f64 },

    #[error("trajectory comes within rho = {rho:e} of (1, 0) at r = {r}; polar angle undefined")]
    NearEquilibrium { rho: f64, r: f64 },

    #[error("polar data requested for the constant trajectory d = 1")]
    NoPolarData,

    #[error("zero count mismatch: angle gives {angle}, sign changes give {sign_changes}; refine dense_stride")]
    ZeroCountMismatch { angle: usize, sign_changes: usize },

    #[error("bracket [{lo}, {hi}] does not change sign")]
    NotBracketed { lo: f64, hi: f64 },

    #[error("root solve on [{lo}, {hi}] did not converge (|v(R)| = {residual:e})")]
    RootNotConverged { lo: f64, hi: f64, residual: f64 },

    #[error("no eigenvalue bracket after {doublings} doublings for k = {k}")]
    EigenBracket { k: usize, doublings: usize },

    #[error("half-turn profile is flat: maximum {max} < 1 (radius below any oscillation threshold)")]
    FlatProfile { max: f64 },

    #[error("threshold predicate is false at R_max = {r_max}")]
    SearchWindowExhausted { r_max: f64 },

    #[error("no d in the lower scan region gives fewer than one half-turn (smallest tried {d:e})")]
    LowerEndpoint { d: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by bad input rather than numerical trouble.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidConfig(_) | Error::InvalidNonlinearity(_) | Error::PhiDomain(_)
        )
    }
}
