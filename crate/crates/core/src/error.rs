use thiserror::Error;

/// Errors raised by the geometry routines and the command-line front end.
#[derive(Debug, Error)]
pub enum GeoError {
    #[error("singular metric: cometric condition estimate {condition:.3e}")]
    SingularMetric { condition: f64 },

    #[error("non-finite state at step {step}")]
    NonFiniteState { step: usize },

    #[error("no convergence after {iterations} iterations (objective {objective:.3e})")]
    NoConvergence { iterations: usize, objective: f64 },

    #[error("frame lost rank: {0}")]
    RankLoss(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl GeoError {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Self::SingularMetric { .. } => "singular_metric",
            Self::NonFiniteState { .. } => "non_finite_state",
            Self::NoConvergence { .. } => "no_convergence",
            Self::RankLoss(_) => "rank_loss",
            Self::DimensionMismatch(_) => "dimension_mismatch",
            Self::InvalidConfig(_) => "invalid_config",
            Self::Parse(_) => "parse_error",
            Self::EmptyDataset => "empty_dataset",
            Self::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, GeoError>;
