use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("configuration length {config} does not match L = {l}")]
    DimensionMismatch { config: usize, l: usize },
    #[error("invalid spin configuration: {0}")]
    InvalidConfig(String),
    #[error("eigensolver failed to converge (L = {0})")]
    NoConvergence(usize),
    #[error("conjugate pairing broken: {unpaired} eigenvalues without a partner (tol {tol:e})")]
    BrokenPairing { unpaired: usize, tol: f64 },
    #[error("imaginary residue {residue:e} exceeds tolerance {tol:e}")]
    ImaginaryResidue { residue: f64, tol: f64 },
    #[error("eigenbasis too ill-conditioned (cond ~ {0:e}) even after regularization")]
    IllConditioned(f64),
    #[error("operation requires {0}")]
    Unsupported(String),
    #[error("system too large for enumeration: L = {0}")]
    TooLarge(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
