use thiserror::Error;

/// Errors raised by the certification, bound and simulation routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("mass unknown at index {k}: beyond the tabulated range and no tail certificate")]
    MassUnknown { k: u64 },

    #[error("cannot sample tail: tabulated masses do not cover the whole distribution")]
    CannotSampleTail,

    #[error("no tail certificate available for {0}")]
    MissingCertificate(String),

    #[error("inadmissible r = {r}: must lie in the open interval (0, {r_max})")]
    InadmissibleR { r: f64, r_max: f64 },

    #[error("tolerance too tight: {what} requires index {index}, above the cap {cap}")]
    ResourceLimit {
        what: &'static str,
        index: f64,
        cap: u64,
    },

    #[error("lambda = {lambda} lies outside the MGF radius |lambda| < {r}")]
    OutsideMgfRadius { lambda: f64, r: f64 },

    #[error("certificates do not share a common r ({first} vs {other})")]
    MixedR { first: f64, other: f64 },

    #[error("report integrity check failed: {0}")]
    Integrity(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
