use thiserror::Error;

/// Errors produced by the fwdsearch library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FsError {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {param} = {value} ({reason})")]
    Domain {
        param: &'static str,
        value: f64,
        reason: &'static str,
    },

    /// The fourth truncated moment of a scaled t law needs more than 4 degrees of freedom.
    #[error("unsupported degrees of freedom: d = {dof} (fourth moments need d > 4)")]
    UnsupportedDof { dof: f64 },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    /// Gram matrix of a subset is numerically singular.
    #[error("rank deficiency on subset of size {subset_size}")]
    RankDeficient { subset_size: usize },

    /// Least squares failed at a given forward step.
    #[error("rank deficiency at forward step m = {m} (subset size {subset_size})")]
    RankDeficientAtStep { m: usize, subset_size: usize },

    #[error("initialization failure: {0}")]
    Initialization(String),

    #[error("leverage overflow: h = {leverage} for in-subset observation {index}")]
    LeverageOverflow { index: usize, leverage: f64 },

    #[error("quadrature did not converge: achieved error estimate {achieved:e} (target {target:e})")]
    Quadrature { achieved: f64, target: f64 },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl FsError {
    pub(crate) fn domain(param: &'static str, value: f64, reason: &'static str) -> Self {
        FsError::Domain {
            param,
            value,
            reason,
        }
    }

    /// True for numeric failures (rank deficiency, leverage, quadrature).
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            FsError::RankDeficient { .. }
                | FsError::RankDeficientAtStep { .. }
                | FsError::LeverageOverflow { .. }
                | FsError::Quadrature { .. }
                | FsError::Initialization(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, FsError>;
