use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("tail index set is empty")]
    TailEmpty,

    #[error("invalid split: {0}")]
    BadSplit(String),

    #[error("invalid spectrum: {0}")]
    BadSpectrum(String),

    #[error("spectrum is not sorted non-increasingly at index {index}")]
    SpectrumNotSorted { index: usize },

    #[error("basis is not orthogonal (max deviation {deviation:e})")]
    BasisNotOrthogonal { deviation: f64 },

    #[error("student-t degrees of freedom must exceed 4, got {dof}")]
    BadMoment { dof: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("matrix is rank deficient (numerical rank {rank} < {required})")]
    RankDeficient { rank: usize, required: usize },

    #[error("tail Gram matrix X_tail X_tail^T is singular")]
    TailRankDeficient,

    #[error("head component is not the minimiser of the ridge objective: {0}")]
    PropositionViolation(String),

    #[error("regime violation: {0}")]
    RegimeViolation(String),

    #[error("restricted cone is empty (R_N = {r_n} > sqrt(sigma_max) = {limit})")]
    ConeEmpty { r_n: f64, limit: f64 },

    #[error("no k >= 0 satisfies r_k(Sigma) >= b N")]
    NoBenignSplit,

    #[error("precondition failed: {0}")]
    Precondition(String),
}

pub type Result<T> = core::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
