use thiserror::Error;

/// Errors raised while building products, reducing curves or pricing.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum PricingError {
    /// Invalid user input: dates, curves, product terms, grid size.
    #[error("configuration error: {0}")]
    Config(String),
    /// A function was evaluated outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),
    /// The recursion produced a non-finite value.
    #[error("numeric failure: {0}")]
    Numeric(String),
    /// Broken internal invariant; indicates a bug rather than bad input.
    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, PricingError>;

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(PricingError::Config(msg.into()))
}
