use thiserror::Error;

/// Errors produced anywhere in the segmentation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter or input violated an operation's preconditions.
    #[error("{0}")]
    Domain(String),

    /// The input bytes could not be turned into a raster.
    #[error("decode failed at {stage}: {message}")]
    Decode { stage: String, message: String },

    /// A raster could not be encoded.
    #[error("encode failed: {0}")]
    Encode(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True when the error is a caller-side validation failure.
    pub fn is_domain(&self) -> bool {
        matches!(self, Error::Domain(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
