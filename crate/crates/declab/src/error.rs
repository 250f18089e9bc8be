//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("interval [{lo}, {hi}] does not split into an integer number of pieces of length {step}")]
    NonIntegralPartition { lo: f64, hi: f64, step: f64 },

    #[error("grid spacing {spacing} too coarse for this operation (need <= {max})")]
    GridTooCoarse { spacing: f64, max: f64 },

    #[error("degenerate box: side lengths {long} x {short}")]
    DegenerateBox { long: f64, short: f64 },

    #[error("quadrature did not converge after {doublings} doublings (last two sup deviations {prev:.3e}, {last:.3e})")]
    QuadratureDivergence {
        doublings: u32,
        prev: f64,
        last: f64,
    },

    #[error("bound ledger is missing entries for scales {0:?}")]
    MissingScales(Vec<f64>),

    #[error("no valid ladder depth N for delta = {delta:.6e} with C0 = 1/{k}")]
    NoValidLadder { delta: f64, k: u64 },

    #[error("resource guard: {0}")]
    ResourceGuard(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the CLI: usage errors 2, numerical failures 3,
    /// resource guards 4.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter(_)
            | Error::NonIntegralPartition { .. }
            | Error::GridTooCoarse { .. }
            | Error::DegenerateBox { .. }
            | Error::Io(_)
            | Error::Json(_) => 2,
            Error::QuadratureDivergence { .. }
            | Error::Numerical(_)
            | Error::MissingScales(_)
            | Error::NoValidLadder { .. } => 3,
            Error::ResourceGuard(_) => 4,
        }
    }
}
