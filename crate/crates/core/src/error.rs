use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid graph shift: {0}")]
    InvalidShift(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("covariance is not positive semidefinite: frequency variance {value:e} below tolerance {tolerance:e}")]
    NotPositiveSemidefinite { value: f64, tolerance: f64 },

    #[error("singular gain at eigenvalue {eigenvalue}: innovation variance vanishes with nonzero cross term")]
    SingularGain { eigenvalue: f64 },

    #[error("observation filter is not all-pass: response {response:e} at eigenvalue {eigenvalue}")]
    NotAllPass { eigenvalue: f64, response: f64 },

    #[error("degenerate trajectory: every state has vanishing energy")]
    DegenerateTrajectory,

    #[error("at step {step}: {source}")]
    AtStep { step: usize, source: Box<Error> },
}

impl Error {
    pub(crate) fn at_step(self, step: usize) -> Self {
        Error::AtStep { step, source: Box::new(self) }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
