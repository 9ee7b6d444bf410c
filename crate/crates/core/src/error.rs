use thiserror::Error;

pub type Result<T, E = QsbError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum QsbError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("Gauss curvature is not positive (min K = {min_k:e}); curvature ratio undefined")]
    NonPositiveCurvature { min_k: f64 },

    #[error("Gauss curvature is negative (min K = {min_k:e})")]
    NegativeCurvature { min_k: f64 },

    #[error("uniformization did not converge after {iterations} iterations (residual {residual:e})")]
    SolverDiverged {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("gauge solve residual {residual:e} exceeds tolerance {tol:e} at t = {t}")]
    GaugeSolveFailed { t: f64, residual: f64, tol: f64 },

    #[error("path curvature β = {beta:e} < 0 at t = {t}")]
    PathCurvatureViolation { t: f64, beta: f64 },

    #[error("ζ integrand is not integrable: β = {beta:e} at interior t = {t}")]
    NonIntegrableZeta { t: f64, beta: f64 },

    #[error("invalid reparameterization: {0}")]
    InvalidReparameterization(String),

    #[error("lapse lost positivity at s = {s} (min v = {min_v:e})")]
    LapseBlowup { s: f64, min_v: f64 },

    #[error("step size underflow at s = {s} (h = {h:e})")]
    StepSizeUnderflow { s: f64, h: f64 },

    #[error("tail window holds {samples} samples, need at least {required}")]
    InsufficientTail { samples: usize, required: usize },
}

impl QsbError {
    /// Variant name, used as the machine-readable error key in reports.
    pub fn name(&self) -> &'static str {
        match self {
            Self::Config(_) => "ConfigError",
            Self::InvalidField(_) => "InvalidField",
            Self::ContractViolation(_) => "ContractViolation",
            Self::NonPositiveCurvature { .. } => "NonPositiveCurvature",
            Self::NegativeCurvature { .. } => "NegativeCurvature",
            Self::SolverDiverged { .. } => "SolverDiverged",
            Self::GaugeSolveFailed { .. } => "GaugeSolveFailed",
            Self::PathCurvatureViolation { .. } => "PathCurvatureViolation",
            Self::NonIntegrableZeta { .. } => "NonIntegrableZeta",
            Self::InvalidReparameterization(_) => "InvalidReparameterization",
            Self::LapseBlowup { .. } => "LapseBlowup",
            Self::StepSizeUnderflow { .. } => "StepSizeUnderflow",
            Self::InsufficientTail { .. } => "InsufficientTail",
        }
    }
}
