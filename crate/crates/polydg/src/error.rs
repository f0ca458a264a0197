//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("mesh error: {0}")]
    Mesh(String),

    #[error("quadrature error: {0}")]
    Quadrature(String),

    #[error("basis error: {0}")]
    Basis(String),

    #[error("assembly error: {0}")]
    Assembly(String),

    #[error("preconditioner setup error: {0}")]
    Schwarz(String),

    #[error("solver error: {0}")]
    Solver(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// CLI exit code: 2 for configuration problems, 3 for solver failures,
    /// 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Io(_) => 2,
            Error::Solver(_) | Error::Schwarz(_) => 3,
            _ => 1,
        }
    }
}
