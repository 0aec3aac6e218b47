use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("invalid observation: {0}")]
    InvalidObservation(String),

    #[error("parameter outside model support: {0}")]
    Support(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("log-likelihood is NaN for observation {index}")]
    NanLikelihood { index: usize },

    #[error("proxy likelihood assigns zero mass to every psi node")]
    DegenerateProxy,

    #[error("posterior has no mass: prior, proxy and likelihood supports do not overlap")]
    EmptyPosterior,

    #[error("relevance is degenerate: {0}")]
    DegenerateRelevance(String),

    #[error("sampler initialization failed: {0}")]
    Initialization(String),

    #[error("relevance refinement failed at iteration {iteration}: {source}")]
    Refinement {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("true parameter {0:?} lies outside the grid")]
    OutsideGrid(Vec<f64>),
}
