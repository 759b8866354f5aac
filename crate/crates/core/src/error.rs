use thiserror::Error;

pub type Result<T> = std::result::Result<T, CarpetError>;

#[derive(Debug, Error)]
pub enum CarpetError {
    #[error("invalid identification sequence: {0}")]
    InvalidSequence(String),

    #[error("cell ({i},{j}) is outside the level-{m} square")]
    OutOfRange { i: u64, j: u64, m: u32 },

    #[error("cell ({i},{j}) does not exist at level {m}")]
    NoSuchCell { i: u64, j: u64, m: u32 },

    #[error("identification sequence has {len} entries but level {m} needs {needed}")]
    SequenceTooShort { len: usize, m: u32, needed: usize },

    #[error("level {m} is above the supported maximum {max}")]
    LevelTooLarge { m: u32, max: u32 },

    #[error("{0}")]
    InvalidArgument(String),

    #[error("graph kind mismatch: {0}")]
    KindMismatch(String),

    #[error("graph is disconnected: {reached} of {total} cells reachable")]
    Disconnected { reached: usize, total: usize },

    #[error("blowup window at level {level} is too small for radius {radius}")]
    WindowTooSmall { level: u32, radius: u64 },

    #[error("linear solve did not converge: relative residual {residual:e} exceeds {tol:e}")]
    SolveFailed { residual: f64, tol: f64 },

    #[error("eigendecomposition failed: {0}")]
    EigenFailed(String),

    #[error("numerical check failed: {0}")]
    NumericCheck(String),

    #[error("spectrum cache: {0}")]
    Cache(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CarpetError {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numeric(&self) -> bool {
        matches!(self, CarpetError::SolveFailed { .. } | CarpetError::EigenFailed(_) | CarpetError::NumericCheck(_))
    }
}
