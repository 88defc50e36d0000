use thiserror::Error;

pub type Result<T> = std::result::Result<T, MechError>;

#[derive(Debug, Error)]
pub enum MechError {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("drift matrix is not stable (max Re λ = {max_real_part:e})")]
    Unstable { max_real_part: f64 },

    #[error("linear system is numerically singular (condition estimate {condition:e})")]
    Conditioning { condition: f64 },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("covariance matrix is not physical (smallest symplectic eigenvalue {min_symplectic})")]
    Unphysical { min_symplectic: f64 },

    #[error("accuracy target not reached: {message} (best {best:e})")]
    Accuracy { message: String, best: f64 },

    #[error("integrator parameter error: {0}")]
    Integrator(String),

    #[error("fit error: {0}")]
    Fit(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl MechError {
    pub(crate) fn invalid(field: &str, reason: impl Into<String>) -> Self {
        MechError::InvalidParameter { field: field.to_string(), reason: reason.into() }
    }

    /// True for errors caused by bad user input rather than by the numerics.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            MechError::InvalidParameter { .. }
                | MechError::Config(_)
                | MechError::Io(_)
                | MechError::Json(_)
        )
    }
}
