use thiserror::Error;

#[derive(Debug, Error)]
pub enum SdpError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite data in {0}")]
    NonFinite(String),
    #[error("invalid solver options: {0}")]
    Options(String),
    #[error("block is not Hermitian: {0}")]
    NotHermitian(String),
    #[error("malformed problem file: {0}")]
    Format(#[from] serde_json::Error),
}
