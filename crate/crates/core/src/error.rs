use thiserror::Error;

/// Every failure the toolkit can report.
#[derive(Debug, Error)]
pub enum CcaError {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("sample count mismatch: x has {x} samples, y has {y}")]
    SampleCountMismatch { x: usize, y: usize },
    #[error("non-finite entry in view {view} at feature {row}, sample {col}")]
    NonFiniteEntry { view: char, row: usize, col: usize },
    #[error("rank budget k = {k} exceeds min(d1, d2, n) = {limit}")]
    RankBudgetTooLarge { k: usize, limit: usize },
    #[error("batch size {m} is not in 1..={n}")]
    BatchTooLarge { m: usize, n: usize },
    #[error("smoothing term must be positive, got {0}")]
    InvalidSmoothing(f64),
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparams(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("cannot whiten an all-zero direction set")]
    AllZeroInput,
    #[error("iterate became non-finite or diverged at iteration {iter}; try a smaller learning rate")]
    NonFiniteIterate { iter: usize },
    #[error("invalid kernel parameter: {0}")]
    InvalidKernelParam(f64),
    #[error("kernel methods need an n x n Gram matrix; n = {n} exceeds the limit {limit}")]
    TooLargeForKernel { n: usize, limit: usize },
    #[error("covariance of view {view} is singular (eigenvalue {eigenvalue:e}); use a ridge")]
    SingularCovariance { view: char, eigenvalue: f64 },
    #[error("basis is rank deficient")]
    RankDeficientBasis,
    #[error("line {line}: expected {expected} fields, found {found}")]
    RaggedRows {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("input contains no data")]
    EmptyInput,
    #[error("line {line}: field {field:?} is not a number")]
    NonNumericField { line: usize, field: String },
    #[error("bad magic number {0:#010x}")]
    BadMagic(u32),
    #[error("file is truncated: {0}")]
    TruncatedFile(String),
    #[error("unsupported model format version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("corrupt model file: {0}")]
    CorruptFile(String),
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("split fraction must lie in (0, 1), got {0}")]
    InvalidFraction(f64),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CcaError>;
