use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Spatial dimensions incompatible with the requested operation.
    #[error("dimension error: {0}")]
    Dimension(String),
    /// Tensor shapes or channel counts disagree.
    #[error("shape error: {0}")]
    Shape(String),
    /// An argument is outside its valid range.
    #[error("argument error: {0}")]
    Argument(String),
    /// Input values outside the model's domain (e.g. negative intensity).
    #[error("domain error: {0}")]
    Domain(String),
    /// A raw filter is constant, so it cannot be normalized.
    #[error("degenerate filter: {0}")]
    DegenerateFilter(String),
    /// Malformed model or image file.
    #[error("format error at byte offset {offset}: {reason}")]
    Format { offset: u64, reason: String },
    /// A NaN or infinity appeared where finite values are required.
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("image codec error: {0}")]
    Image(#[from] image::ImageError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn shape_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Shape(msg.into()))
}

pub(crate) fn arg_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Argument(msg.into()))
}
