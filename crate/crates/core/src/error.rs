use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("singular evaluation in `{op}` at operand value {value:e}")]
    SingularEvaluation { op: String, value: f64 },

    #[error("singular linear system: pivot {pivot:e} in column {column}")]
    SingularSystem { pivot: f64, column: usize },

    #[error("point {point:?} lies outside the chart domain (radius {radius})")]
    Domain { point: Vec<f64>, radius: f64 },

    #[error("metric error: {0}")]
    Metric(String),

    #[error("structure defect: `{relation}` violated with residual {residual:e}")]
    StructureDefect { relation: String, residual: f64 },

    #[error("form degree error: {0}")]
    Degree(String),

    #[error("input matrix is not skew-symmetric (asymmetry {0:e})")]
    NotSkew(f64),

    #[error("rank deficiency: {0}")]
    RankDeficient(String),

    #[error("not a 3-quasi-Sasakian structure: {0}")]
    NotThreeQuasiSasakian(String),

    #[error("indeterminate rank, singular values {singular_values:?}")]
    IndeterminateRank { singular_values: Vec<f64> },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("internal consistency error: {0}")]
    InternalConsistency(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("manifold spec error: {0}")]
    Spec(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit status for this error: 2 for configuration and input
    /// problems, 1 for everything found while checking.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Spec(_) | Error::Io(_) => 2,
            _ => 1,
        }
    }
}
