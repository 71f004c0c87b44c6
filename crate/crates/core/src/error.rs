use thiserror::Error;

use crate::dist::DistError;
use crate::linalg::LinalgError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("insufficient sample: need more than {needed} observations, got {got}")]
    InsufficientSample { needed: usize, got: usize },
    #[error("design Gram matrix is singular")]
    SingularDesign,
    #[error("lagged-residual Gram matrix of the VAR is singular")]
    SingularGram,
    #[error("fitted VAR is not stationary")]
    NonStationaryVar,
    #[error("restricted covariance R M⁻¹ Rᵀ is singular")]
    SingularRestriction,
    #[error("restriction matrix has rank {rank} < {rows} rows")]
    RankDeficient { rank: usize, rows: usize },
    #[error("covariance matrix is singular")]
    SingularCovariance,
    #[error("GRS requires regressors common to every equation")]
    NotCommonFactors,
    #[error("every replication failed")]
    AllReplicationsFailed,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Dist(#[from] DistError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Short stable name of the variant, used as a key in failure tallies.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch(_) => "DimensionMismatch",
            Error::InsufficientSample { .. } => "InsufficientSample",
            Error::SingularDesign => "SingularDesign",
            Error::SingularGram => "SingularGram",
            Error::NonStationaryVar => "NonStationaryVar",
            Error::SingularRestriction => "SingularRestriction",
            Error::RankDeficient { .. } => "RankDeficient",
            Error::SingularCovariance => "SingularCovariance",
            Error::NotCommonFactors => "NotCommonFactors",
            Error::AllReplicationsFailed => "AllReplicationsFailed",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::Linalg(_) => "Linalg",
            Error::Dist(_) => "Dist",
        }
    }
}
