use thiserror::Error;

/// Errors shared across the simulator.
#[derive(Debug, Error)]
pub enum AoaError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("stream truncated before the end of the CTE")]
    TruncatedCte,
    #[error("zero-magnitude reference sample")]
    DegenerateSample,
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("bearings are near-parallel (|sin| below threshold)")]
    ParallelBearings,
    #[error("source position coincides with the receiver")]
    DegenerateGeometry,
    #[error("no measurements left after filtering")]
    NoData,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("CSV output error: {0}")]
    Csv(String),
}

impl From<csv::Error> for AoaError {
    fn from(e: csv::Error) -> Self {
        AoaError::Csv(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, AoaError>;
