use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate curve: {0}")]
    DegenerateCurve(String),

    #[error("numerical failure: {0}")]
    Numerics(String),

    #[error("sheet continuation failed: {0}")]
    Continuation(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("verification gate failed: {0}")]
    VerificationGate(String),

    #[error("special divisor: {0}")]
    SpecialDivisor(String),

    #[error("not implemented: {0}")]
    NotImplemented(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
