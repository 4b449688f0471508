use thiserror::Error;

pub type Result<T, E = BinnError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum BinnError {
    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("singular kernel evaluation at r = 0 (route through singular quadrature)")]
    SingularEvaluation,

    #[error("specification error: {0}")]
    Specification(String),

    #[error("ill-posed problem: {reason} (condition estimate {condition:.3e})")]
    IllPosed { reason: String, condition: f64 },

    #[error("training diverged at iteration {iteration}: loss {loss:e}, parameter norm {param_norm:e}, gradient norm {grad_norm:e}")]
    Diverged {
        iteration: usize,
        loss: f64,
        param_norm: f64,
        grad_norm: f64,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("undefined normalization: exact field is identically zero")]
    UndefinedNormalization,

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl BinnError {
    /// Process exit status for the command-line driver: 2 for invalid input,
    /// 3 for training divergence, 4 for numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            BinnError::Diverged { .. } => 3,
            BinnError::IllPosed { .. }
            | BinnError::SingularEvaluation
            | BinnError::Domain(_)
            | BinnError::UndefinedNormalization => 4,
            _ => 2,
        }
    }
}
