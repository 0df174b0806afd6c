use thiserror::Error;

/// Errors produced by fitting, estimation, and simulation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("response has {y_len} entries but design matrix has {rows} rows")]
    DimensionMismatch { y_len: usize, rows: usize },

    #[error("design matrix is rank deficient: rank {rank} < {cols} columns")]
    RankDeficient { rank: usize, cols: usize },

    #[error("need more observations than parameters: n = {n}, p = {p}")]
    TooFewObservations { n: usize, p: usize },

    #[error("restriction matrix is invalid: {0}")]
    InvalidRestriction(String),

    #[error("H C^-1 H' is numerically singular (condition estimate {cond:.3e})")]
    SingularRestriction { cond: f64 },

    #[error("Stein-family estimators need at least 3 restricted directions, got {p2}")]
    TooFewRestrictions { p2: usize },

    #[error("significance level must lie strictly in (0, 1), got {alpha}")]
    InvalidLevel { alpha: f64 },

    #[error("inverse moment of order {order} diverges for {df} degrees of freedom")]
    DivergentMoment { df: u32, order: u32 },

    #[error("estimator kind {kind} is not supported by {context}")]
    UnknownKind {
        kind: &'static str,
        context: &'static str,
    },

    #[error("pretest estimator requires a significance level")]
    MissingAlpha,

    #[error("fold {fold} leaves only {train_rows} training rows for {p} parameters")]
    FoldTooSmall {
        fold: usize,
        train_rows: usize,
        p: usize,
    },

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("too many rank-deficient replications: {rejected} of {total} (cap 1%)")]
    RejectionCapExceeded { rejected: usize, total: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
