use thiserror::Error;

use crate::protocol::HuntProbe;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller broke an operation's precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// The request is valid but exceeds a configured resource bound.
    #[error("capability exceeded: {0}")]
    Capability(String),

    #[error("instance generation failed after {restarts} restarts (n_bits = {n_bits})")]
    Generation { n_bits: usize, restarts: usize },

    #[error("noise realization has zero power after {attempts} resampling attempts")]
    ZeroPower { attempts: usize },

    #[error("integration failed: {0}")]
    Integration(String),

    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:.3e}, s = {s})")]
    Eigensolver {
        iterations: usize,
        residual: f64,
        s: f64,
    },

    #[error("hunt exhausted {integrations} integrations without landing in the window")]
    HuntFailed {
        integrations: usize,
        trace: Vec<HuntProbe>,
    },

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("campaign failed: {failed} of {total} hunts failed at N = {n_bits}")]
    Campaign {
        n_bits: usize,
        failed: usize,
        total: usize,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub(crate) fn contract<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Contract(msg.into()))
}
