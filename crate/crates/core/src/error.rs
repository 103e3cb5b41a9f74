use thiserror::Error;

pub type Result<T, E = CcaError> = std::result::Result<T, E>;

/// Coarse classification of an error, used by front-ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad input file or malformed/inconsistent data.
    Data,
    /// Invalid parameter or option value.
    Parameter,
    /// Degenerate or ill-conditioned numerical problem.
    Numerical,
}

#[derive(Debug, Error)]
pub enum CcaError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv parse error at line {line}: {message}")]
    Csv { line: u64, message: String },

    #[error("ragged row at line {line}: expected {expected} cells, found {found}")]
    RaggedRow {
        line: u64,
        expected: usize,
        found: usize,
    },

    #[error("non-numeric value {value:?} at row {row}, column {column:?}")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("unknown column {0:?}")]
    UnknownColumn(String),

    #[error("column {0:?} appears on both sides of the variable split")]
    OverlappingColumn(String),

    #[error("column mismatch: {0}")]
    ColumnMismatch(String),

    #[error("{stage} requires complete data but column {column:?} has missing values")]
    MissingValues { stage: &'static str, column: String },

    #[error("column {0:?} is constant (zero variance)")]
    DegenerateColumn(String),

    #[error("column {0:?} is entirely missing after row removal and cannot be imputed")]
    UnimputableColumn(String),

    #[error("Box-Cox requires strictly positive values; column {column:?} row {row} has {value}")]
    BoxCoxDomain {
        column: String,
        row: usize,
        value: f64,
    },

    #[error("confound design matrix is rank deficient (collinear confounds: {0})")]
    Collinearity(String),

    #[error(
        "classical CCA needs more observations than variables in the larger set \
         (n = {n}, p = {p}, q = {q}); canonical vectors would be meaningless. \
         Reduce dimensions first (--pca-components / --pca-variance), add a ridge \
         penalty (--ridge), or use the sparse model"
    )]
    TooFewObservations { n: usize, p: usize, q: usize },

    #[error("{which} covariance is numerically singular (eigenvalue ratio {ratio:.3e} below floor 1e-10)")]
    IllConditioned { which: &'static str, ratio: f64 },

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("permutation test aborted: {failed} of {total} replicates failed")]
    TooManyFailures { failed: usize, total: usize },
}

impl CcaError {
    pub fn kind(&self) -> ErrorKind {
        use CcaError::*;
        match self {
            Io { .. } | Csv { .. } | RaggedRow { .. } | NonNumeric { .. } | Schema(_)
            | UnknownColumn(_) | ColumnMismatch(_) | MissingValues { .. }
            | DegenerateColumn(_) | UnimputableColumn(_) | BoxCoxDomain { .. } => ErrorKind::Data,
            OverlappingColumn(_) | Parameter(_) | Dimension(_) => ErrorKind::Parameter,
            Collinearity(_) | TooFewObservations { .. } | IllConditioned { .. } | Numerical(_)
            | TooManyFailures { .. } => ErrorKind::Numerical,
        }
    }
}
