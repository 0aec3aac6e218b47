//! Relevance-weighted Bayesian transfer learning.
//!
//! Source observations from related tasks are reweighted by a relevance
//! function before they inform the posterior of a shared parameter `θ`,
//! while proxy information `z` informs the target task parameter `ψ`.
//! Posteriors are computed by exact grid quadrature or random-walk
//! Metropolis, and the [`diagnostics`] module evaluates information gain
//! and misspecification measures exactly where the outcome space permits.

pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod inference;
pub mod math;
pub mod model;
pub mod relevance;
pub mod rng;
pub mod synthetic;

pub use error::{Error, Result};
pub use grid::{GridAxis, ParameterGrid, Prior};
pub use model::{
    Design, IntervalBox, Model, Observation, Outcome, SharedParam, SourceData, TaskParam,
};
