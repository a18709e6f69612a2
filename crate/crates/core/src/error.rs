use thiserror::Error;

/// Errors raised by model construction and the solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExecError {
    /// A model or option failed validation; the first field names the offender.
    #[error("invalid {field}: {reason}")]
    Invalid { field: String, reason: String },

    #[error("time {t} outside [0, {horizon}]")]
    Domain { t: f64, horizon: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// Cholesky broke down: the impact matrix is not positive definite.
    #[error("NotSPD: Cholesky pivot {pivot:e} at row {row} below threshold {threshold:e}")]
    NotSpd {
        row: usize,
        pivot: f64,
        threshold: f64,
    },

    #[error("NotApplicable: {0}")]
    NotApplicable(String),

    /// The existence certificate failed and the solve was not forced.
    #[error("NotCertified: existence condition fails (theta integral {integral_theta}, eta integral {integral_eta}, bound ln 3)")]
    NotCertified {
        integral_theta: f64,
        integral_eta: f64,
    },

    #[error("BracketFailure: terminal inventory could not be bracketed in initial velocity after {doublings} doublings")]
    BracketFailure { doublings: u32 },

    #[error("ToleranceFailure: |zeta(T)| = {residual:e} after {iterations} bisections")]
    ToleranceFailure { iterations: u32, residual: f64 },

    #[error("Unsupported: {0}")]
    Unsupported(String),

    #[error("Singular: {0}")]
    Singular(String),
}

impl ExecError {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        ExecError::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// True for failures of the numerical method rather than of the input.
    pub fn is_solver_error(&self) -> bool {
        matches!(
            self,
            ExecError::NotSpd { .. }
                | ExecError::NotApplicable(_)
                | ExecError::NotCertified { .. }
                | ExecError::BracketFailure { .. }
                | ExecError::ToleranceFailure { .. }
                | ExecError::Unsupported(_)
                | ExecError::Singular(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, ExecError>;
