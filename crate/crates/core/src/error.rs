use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("tensor budget exceeded: {requested} coefficients requested, budget is {budget}")]
    Budget { requested: u128, budget: usize },
    #[error("series diverges: {0}")]
    Divergence(String),
    #[error("value out of representable range: {0}")]
    Range(String),
    #[error("solution blew up at t = {time}")]
    BlowUp { time: f64 },
    #[error("series did not converge within {levels} levels (last term norm {last_term:e})")]
    Truncation {
        levels: usize,
        last_term: f64,
        partial: Vec<f64>,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
