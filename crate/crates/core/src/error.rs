use thiserror::Error;

#[derive(Debug, Error)]
pub enum SketchError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("cell ({i}, {j}) out of range")]
    IndexOutOfRange { i: u32, j: u32 },
    #[error("sketch parameters differ")]
    ParamsMismatch,
    #[error("sketch seeds differ")]
    SeedMismatch,
    #[error("sketch kinds differ")]
    KindMismatch,
    #[error("bad magic bytes")]
    BadMagic,
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u8),
    #[error("unknown sketch kind {0}")]
    UnknownKind(u8),
    #[error("checksum mismatch")]
    Checksum,
    #[error("truncated input")]
    Truncated,
    #[error("lambda must be positive, got {0}")]
    NonPositiveLambda(f64),
    #[error("encoded size {bits} bits exceeds the budget of {budget} bits")]
    BudgetExceeded { bits: u64, budget: u64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
