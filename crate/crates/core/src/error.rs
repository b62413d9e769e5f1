use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0} vs {1}")]
    Dimension(usize, usize),

    #[error("invalid map: {0}")]
    InvalidMap(String),

    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("pre-orbit pairing failed at depth {depth}: {reason}")]
    Pairing { depth: usize, reason: String },

    #[error("degenerate map: {0}")]
    DegenerateMap(String),

    #[error("argument {x} leaves the concavity window [0, {window}]")]
    Window { x: f64, window: f64 },

    #[error("division by vanishing V at x = {0}")]
    Division(f64),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("radius {r} is not below the working radius {rho1}")]
    Radius { r: f64, rho1: f64 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
