use std::fmt;

use rmen_cca::CcaError;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Config(String),
    Core(CcaError),
}

impl From<CcaError> for CliError {
    fn from(e: CcaError) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(CcaError::Io(e))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl CliError {
    /// 2 usage, 3 I/O, 4 config file, 10 and up one per library error.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Config(_) => 4,
            CliError::Core(e) => match e {
                CcaError::Io(_) => 3,
                CcaError::DegenerateInput(_) => 10,
                CcaError::SampleCountMismatch { .. } => 11,
                CcaError::NonFiniteEntry { .. } => 12,
                CcaError::RankBudgetTooLarge { .. } => 13,
                CcaError::BatchTooLarge { .. } => 14,
                CcaError::InvalidSmoothing(_) => 15,
                CcaError::InvalidHyperparams(_) => 16,
                CcaError::DimensionMismatch(_) => 17,
                CcaError::AllZeroInput => 18,
                CcaError::NonFiniteIterate { .. } => 19,
                CcaError::InvalidKernelParam(_) => 20,
                CcaError::TooLargeForKernel { .. } => 21,
                CcaError::SingularCovariance { .. } => 22,
                CcaError::RankDeficientBasis => 23,
                CcaError::RaggedRows { .. } => 24,
                CcaError::EmptyInput => 25,
                CcaError::NonNumericField { .. } => 26,
                CcaError::BadMagic(_) => 27,
                CcaError::TruncatedFile(_) => 28,
                CcaError::VersionMismatch { .. } => 29,
                CcaError::CorruptFile(_) => 30,
                CcaError::InvalidSpec(_) => 31,
                CcaError::InvalidFraction(_) => 32,
            },
        }
    }
}
