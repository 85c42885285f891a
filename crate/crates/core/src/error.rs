use thiserror::Error;

/// Everything that can go wrong while simulating or analysing the micromaser.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum MaserError {
    #[error("cutoff too small: {0}")]
    CutoffTooSmall(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("integrator step size failure: {0}")]
    StepSizeFailure(String),

    #[error("trajectory step too large: total jump probability {probability:.4} >= {bound}")]
    StepTooLarge { probability: f64, bound: f64 },

    #[error("fit failure: {0}")]
    FitFailure(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("degenerate null space: {0}")]
    DegenerateNullspace(String),

    #[error("validity window violated: {0}")]
    ValidityViolated(String),

    #[error("configuration errors:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error("i/o error: {0}")]
    Io(String),
}

impl MaserError {
    /// Machine-readable category, printed by the command line runner on failure.
    pub fn category(&self) -> &'static str {
        match self {
            MaserError::CutoffTooSmall(_) => "cutoff-too-small",
            MaserError::InvalidState(_) => "invalid-state",
            MaserError::InvalidParams(_) | MaserError::Config(_) => "config-error",
            MaserError::StepSizeFailure(_) | MaserError::StepTooLarge { .. } => {
                "step-size-failure"
            }
            MaserError::FitFailure(_) | MaserError::DegenerateData(_) => "fit-failure",
            MaserError::DegenerateNullspace(_) => "degenerate-nullspace",
            MaserError::ValidityViolated(_) => "validity-violated",
            MaserError::Io(_) => "io-error",
        }
    }
}

impl From<std::io::Error> for MaserError {
    fn from(e: std::io::Error) -> Self {
        MaserError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, MaserError>;
