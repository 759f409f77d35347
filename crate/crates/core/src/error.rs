use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("empty input")]
    EmptyInput,
    #[error("series length {len} is not divisible by patch width {width}")]
    IndivisibleLength { len: usize, width: usize },
    #[error("patch width {width} exceeds series length {len}")]
    WidthTooLarge { len: usize, width: usize },
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("forward cache does not match the network")]
    CacheMismatch,
    #[error("invalid layer dimensions: {0}")]
    InvalidDims(String),
    #[error("index out of range: {what} {index} >= {bound}")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        bound: usize,
    },
    #[error("at least {required} patches required, got {found}")]
    TooFewPatches { required: usize, found: usize },
    #[error("loss became non-finite at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("segmentation has no segments")]
    EmptySegments,
    #[error("unknown concept {0}")]
    UnknownConcept(usize),
    #[error("label sequence is empty")]
    EmptySequence,
    #[error("unknown label {0}")]
    UnknownLabel(usize),
    #[error("no historical patch carries concept {0}")]
    NoHistoryForConcept(usize),
    #[error("boundary list is not sorted")]
    UnsortedInput,
    #[error("label sequences differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl Error {
    pub fn dims(context: &'static str, expected: usize, found: usize) -> Self {
        Error::DimensionMismatch {
            context,
            expected,
            found,
        }
    }
}
