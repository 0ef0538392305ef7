use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate extent: {axis} min {min} is not below max {max}")]
    DegenerateExtent { axis: char, min: f64, max: f64 },
    #[error("grid needs at least 3 nodes per axis, got {nx}x{ny}")]
    TooCoarse { nx: usize, ny: usize },
    #[error("invalid domain shape: {0}")]
    InvalidShape(String),
    #[error("domain has no interior nodes after masking")]
    EmptyInterior,
    #[error("exponent p = {0} must be finite and greater than 1")]
    InvalidExponent(f64),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("invalid option {name}: {reason}")]
    InvalidOption { name: &'static str, reason: String },
    #[error("non-finite value at node ({i}, {j})")]
    NonFinite { i: usize, j: usize },
    #[error("singular point at r = {r}: {reason}")]
    Singular { r: f64, reason: String },
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("inconsistent evaluation: {0}")]
    Inconsistent(String),
    #[error("input was not converged")]
    NotConverged,
    #[error("malformed artifact: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
