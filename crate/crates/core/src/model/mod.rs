//! Domain types and the probabilistic-model abstraction.
//!
//! A [`Model`] evaluates `log p(dᵢ | θ, ψᵢ)` for one observation and can
//! simulate new observations. Four models are provided: a categorical toy
//! whose outcome space can be enumerated, a Gaussian linear regression, a
//! binomial-logit treatment model, and a Gaussian process with a composite
//! RBF kernel.

mod binomial;
mod gp;
mod linear;
mod toy;

pub use binomial::{binomial_logit_model, BinomialLogitModel, TREATMENT_LEVELS};
pub use gp::{gp_model, GpModel, GP_BASE_JITTER, GP_MAX_JITTER};
pub use linear::{linear_model, LinearModel};
pub use toy::{discrete_toy_model, DiscreteToyModel};

use std::ops::Deref;

use rand::RngCore;

use crate::error::{Error, Result};

/// Outcome of a single observation.
#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Real(f64),
    Count(u64),
    /// A whole trajectory, for models that treat one sampled function as one
    /// observation.
    Vector(Vec<f64>),
}

impl Outcome {
    pub fn as_real(&self) -> Option<f64> {
        match self {
            Outcome::Real(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_count(&self) -> Option<u64> {
        match self {
            Outcome::Count(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_vector(&self) -> Option<&[f64]> {
        match self {
            Outcome::Vector(v) => Some(v),
            _ => None,
        }
    }
}

/// Covariates and (for binomial models) the number of trials: everything
/// about an observation except its outcome.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Design {
    pub covariates: Vec<f64>,
    pub trial_count: Option<u64>,
}

impl Design {
    pub fn new(covariates: Vec<f64>) -> Self {
        Self {
            covariates,
            trial_count: None,
        }
    }

    pub fn with_trials(covariates: Vec<f64>, trials: u64) -> Self {
        Self {
            covariates,
            trial_count: Some(trials),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub covariates: Vec<f64>,
    pub outcome: Outcome,
    pub trial_count: Option<u64>,
}

impl Observation {
    pub fn new(design: Design, outcome: Outcome) -> Self {
        Self {
            covariates: design.covariates,
            outcome,
            trial_count: design.trial_count,
        }
    }

    pub fn real(covariates: Vec<f64>, y: f64) -> Self {
        Self {
            covariates,
            outcome: Outcome::Real(y),
            trial_count: None,
        }
    }

    pub fn count(covariates: Vec<f64>, y: u64, trials: Option<u64>) -> Self {
        Self {
            covariates,
            outcome: Outcome::Count(y),
            trial_count: trials,
        }
    }

    pub fn design(&self) -> Design {
        Design {
            covariates: self.covariates.clone(),
            trial_count: self.trial_count,
        }
    }
}

/// Source data `d = (d₁, …, dₙ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceData {
    observations: Vec<Observation>,
}

impl SourceData {
    pub fn new(observations: Vec<Observation>) -> Result<Self> {
        if observations.is_empty() {
            return Err(Error::Validation(
                "source data must contain at least one observation".into(),
            ));
        }
        let dim = observations[0].covariates.len();
        if let Some(i) = observations.iter().position(|o| o.covariates.len() != dim) {
            return Err(Error::InvalidObservation(format!(
                "observation {i} has {} covariates, expected {dim}",
                observations[i].covariates.len()
            )));
        }
        Ok(Self { observations })
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn designs(&self) -> Vec<Design> {
        self.observations.iter().map(Observation::design).collect()
    }
}

impl Deref for SourceData {
    type Target = [Observation];

    fn deref(&self) -> &[Observation] {
        &self.observations
    }
}

macro_rules! param_newtype {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name(Vec<f64>);

        impl $name {
            pub fn new(value: Vec<f64>) -> Result<Self> {
                if value.is_empty() {
                    return Err(Error::Validation(concat!(stringify!($name), " must have dimension >= 1").into()));
                }
                if value.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Validation(format!("{} has non-finite entries: {value:?}", stringify!($name))));
                }
                Ok(Self(value))
            }

            pub fn scalar(value: f64) -> Self {
                assert!(value.is_finite(), "parameter must be finite");
                Self(vec![value])
            }

            pub fn values(&self) -> &[f64] {
                &self.0
            }

            pub fn into_inner(self) -> Vec<f64> {
                self.0
            }
        }

        impl Deref for $name {
            type Target = [f64];

            fn deref(&self) -> &[f64] {
                &self.0
            }
        }
    };
}

param_newtype!(
    /// Shared parameter θ, common to every task.
    SharedParam
);
param_newtype!(
    /// Task parameter ψ, specific to one task.
    TaskParam
);

/// Axis-aligned box `[lo₁, hi₁] × … × [lo_k, hi_k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalBox {
    bounds: Vec<(f64, f64)>,
}

impl IntervalBox {
    pub fn new(bounds: Vec<(f64, f64)>) -> Self {
        assert!(
            bounds.iter().all(|(lo, hi)| lo <= hi),
            "empty interval in box"
        );
        Self { bounds }
    }

    pub fn cube(dim: usize, lo: f64, hi: f64) -> Self {
        Self::new(vec![(lo, hi); dim])
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        point.len() == self.bounds.len()
            && point
                .iter()
                .zip(&self.bounds)
                .all(|(x, (lo, hi))| *x >= *lo && *x <= *hi)
    }

    pub fn center(&self) -> Vec<f64> {
        self.bounds.iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect()
    }

    /// Box with each factor repeated `times` times.
    pub fn repeat(&self, times: usize) -> Self {
        let mut bounds = Vec::with_capacity(self.bounds.len() * times);
        for _ in 0..times {
            bounds.extend_from_slice(&self.bounds);
        }
        Self { bounds }
    }
}

/// A probabilistic model of one source observation given `(θ, ψᵢ)`.
///
/// `log_likelihood` and `simulate` are pure; all randomness comes from the
/// generator passed in.
pub trait Model: Send + Sync {
    fn name(&self) -> &str;

    fn covariate_dim(&self) -> usize;

    fn theta_support(&self) -> &IntervalBox;

    fn psi_support(&self) -> &IntervalBox;

    fn theta_dim(&self) -> usize {
        self.theta_support().dim()
    }

    fn psi_dim(&self) -> usize {
        self.psi_support().dim()
    }

    fn log_likelihood(
        &self,
        obs: &Observation,
        theta: &SharedParam,
        psi: &TaskParam,
    ) -> Result<f64>;

    /// Log-likelihood of every observation under one `(θ, ψ)`. Models with
    /// expensive per-parameter setup override this.
    fn log_likelihood_batch(
        &self,
        data: &[Observation],
        theta: &SharedParam,
        psi: &TaskParam,
    ) -> Result<Vec<f64>> {
        data.iter()
            .map(|obs| self.log_likelihood(obs, theta, psi))
            .collect()
    }

    fn simulate(
        &self,
        design: &Design,
        theta: &SharedParam,
        psi: &TaskParam,
        rng: &mut dyn RngCore,
    ) -> Result<Observation>;

    /// Log of the outcome density at its mode, used to scale relevance
    /// weights into `[0, 1]`. Models without a natural normalizer return a
    /// configuration error.
    fn log_mode_density(
        &self,
        _design: &Design,
        _theta: &SharedParam,
        _psi: &TaskParam,
    ) -> Result<f64> {
        Err(Error::Configuration(format!(
            "model '{}' has no mode-density normalizer; use the sigmoid-ratio relevance",
            self.name()
        )))
    }

    fn log_mode_density_batch(
        &self,
        designs: &[Design],
        theta: &SharedParam,
        psi: &TaskParam,
    ) -> Result<Vec<f64>> {
        designs
            .iter()
            .map(|d| self.log_mode_density(d, theta, psi))
            .collect()
    }

    /// Log mode density of the moment-matched approximation to the mixture
    /// `Σₖ wₖ p(· | θₖ, ψ)`: a normal with the mixture's (co)variance for
    /// continuous models, the mixture's largest probability for discrete
    /// ones. Models without one return a configuration error.
    fn log_matched_mode_density(
        &self,
        _design: &Design,
        _thetas: &[SharedParam],
        _weights: &[f64],
        _psi: &TaskParam,
    ) -> Result<f64> {
        Err(Error::Configuration(format!(
            "model '{}' has no matched-variance normalizer; use the sigmoid-ratio relevance",
            self.name()
        )))
    }

    /// Nodes and probability weights that integrate functions of the outcome
    /// against `p(· | θ, ψ)`: exact enumeration for discrete models, a wide
    /// trapezoid rule for scalar continuous ones, `None` otherwise.
    fn outcome_quadrature(
        &self,
        _design: &Design,
        _theta: &SharedParam,
        _psi: &TaskParam,
    ) -> Result<Option<Vec<(Observation, f64)>>> {
        Ok(None)
    }

    /// True when [`Model::outcome_quadrature`] is an exact enumeration of a
    /// finite outcome space.
    fn is_enumerable(&self) -> bool {
        false
    }

    fn check_params(&self, theta: &SharedParam, psi: &TaskParam) -> Result<()> {
        if !self.theta_support().contains(theta) {
            return Err(Error::Support(format!(
                "{}: theta {:?} outside {:?}",
                self.name(),
                theta.values(),
                self.theta_support().bounds()
            )));
        }
        if !self.psi_support().contains(psi) {
            return Err(Error::Support(format!(
                "{}: psi {:?} outside {:?}",
                self.name(),
                psi.values(),
                self.psi_support().bounds()
            )));
        }
        Ok(())
    }
}

pub(crate) fn check_covariates(model: &dyn Model, covariates: &[f64]) -> Result<()> {
    if covariates.len() != model.covariate_dim() {
        return Err(Error::InvalidObservation(format!(
            "{}: expected {} covariates, got {}",
            model.name(),
            model.covariate_dim(),
            covariates.len()
        )));
    }
    Ok(())
}
