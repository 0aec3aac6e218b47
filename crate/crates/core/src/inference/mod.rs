//! Posterior engines: exact grid quadrature for low-dimensional problems and
//! random-walk Metropolis for the rest.

mod metropolis;
mod posterior;
mod predictive;
mod proxy;
mod table;

pub use metropolis::{metropolis, metropolis_posterior, McmcChain, MetropolisConfig, MIN_SAMPLES};
pub use posterior::{
    classic_posterior, classic_posterior_from_table, r_weighted_likelihood, r_weighted_posterior,
    r_weighted_posterior_from_table, PosteriorTable,
};
pub use predictive::{posterior_predictive, Predictive};
pub use proxy::{
    proxy_log_likelihoods, proxy_posterior, ProxyLikelihood, ProxyObservation, ProxyPayload,
};
pub use table::LikelihoodTable;
