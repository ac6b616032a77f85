use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        found: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("numerical failure at component {component}: {message}")]
    Numerical { component: usize, message: String },

    #[error("no convergence after {iterations} iterations: {message}")]
    Convergence { iterations: usize, message: String },

    #[error("metric schedule violation at n = {n}, component {component}: {message}")]
    ScheduleViolation {
        n: usize,
        component: usize,
        message: String,
    },

    #[error("divergence guard tripped at n = {n}: iterate norm {norm:e}")]
    Divergence { n: usize, norm: f64 },
}

pub(crate) fn check_dim(context: &str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch {
            context: context.to_string(),
            expected,
            found,
        });
    }
    Ok(())
}
