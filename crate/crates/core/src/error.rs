use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("degenerate particle weights (all zero or non-finite)")]
    DegenerateWeights,
    #[error("measurement series is empty")]
    EmptyMeasurements,
    #[error("initial parameter set has a non-finite score ({0})")]
    NonFiniteInitialScore(f64),
    #[error("design matrix is rank deficient: column {column} is linearly dependent on earlier columns")]
    RankDeficient { column: usize },
    #[error("column {column} is numerically dependent on the columns before it")]
    DependentColumn { column: usize },
    #[error("input series has {len} samples, need at least {needed}")]
    SeriesTooShort { len: usize, needed: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
