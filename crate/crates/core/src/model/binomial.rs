use rand::RngCore;
use rand_distr::{Binomial, Distribution};

use super::{
    check_covariates, Design, IntervalBox, Model, Observation, Outcome, SharedParam, TaskParam,
};
use crate::error::{Error, Result};
use crate::math::{binomial_log_pmf, log_sigmoid, sigmoid};

/// Treatment levels encoded by the four indicator covariates.
pub const TREATMENT_LEVELS: [&str; 4] = ["A", "B", "C", "D"];

/// `y | x, N ~ Binomial(N, sigmoid(θ·x + ψ))` with `x` a vector of four
/// treatment indicators and `ψ` a per-study intercept.
#[derive(Debug, Clone)]
pub struct BinomialLogitModel {
    theta_support: IntervalBox,
    psi_support: IntervalBox,
}

pub fn binomial_logit_model() -> BinomialLogitModel {
    BinomialLogitModel {
        theta_support: IntervalBox::cube(4, -10.0, 10.0),
        psi_support: IntervalBox::cube(1, -10.0, 10.0),
    }
}

impl BinomialLogitModel {
    pub fn linear_predictor(&self, covariates: &[f64], theta: &[f64], psi: &[f64]) -> f64 {
        covariates
            .iter()
            .zip(theta)
            .map(|(x, t)| x * t)
            .sum::<f64>()
            + psi[0]
    }

    /// Indicator covariates for treatment level `index`.
    pub fn indicator(index: usize) -> Vec<f64> {
        let mut x = vec![0.0; TREATMENT_LEVELS.len()];
        x[index] = 1.0;
        x
    }

    fn trials(&self, trial_count: Option<u64>) -> Result<u64> {
        trial_count.ok_or_else(|| {
            Error::InvalidObservation("binomial observation needs a trial count".into())
        })
    }

    /// Log pmf on raw parameter slices, skipping support checks. Used by the
    /// Metropolis targets, which handle support themselves.
    pub fn log_pmf(
        &self,
        y: u64,
        trials: u64,
        covariates: &[f64],
        theta: &[f64],
        psi: &[f64],
    ) -> f64 {
        let eta = self.linear_predictor(covariates, theta, psi);
        binomial_log_pmf(y, trials, log_sigmoid(eta), log_sigmoid(-eta))
    }
}

impl Model for BinomialLogitModel {
    fn name(&self) -> &str {
        "binomial-logit"
    }

    fn covariate_dim(&self) -> usize {
        TREATMENT_LEVELS.len()
    }

    fn theta_support(&self) -> &IntervalBox {
        &self.theta_support
    }

    fn psi_support(&self) -> &IntervalBox {
        &self.psi_support
    }

    fn log_likelihood(
        &self,
        obs: &Observation,
        theta: &SharedParam,
        psi: &TaskParam,
    ) -> Result<f64> {
        check_covariates(self, &obs.covariates)?;
        self.check_params(theta, psi)?;
        let n = self.trials(obs.trial_count)?;
        let y = obs.outcome.as_count().ok_or_else(|| {
            Error::InvalidObservation(format!(
                "binomial model expects a count outcome, got {:?}",
                obs.outcome
            ))
        })?;
        if y > n {
            return Err(Error::InvalidObservation(format!(
                "outcome {y} exceeds trial count {n}"
            )));
        }
        Ok(self.log_pmf(y, n, &obs.covariates, theta, psi))
    }

    fn simulate(
        &self,
        design: &Design,
        theta: &SharedParam,
        psi: &TaskParam,
        rng: &mut dyn RngCore,
    ) -> Result<Observation> {
        check_covariates(self, &design.covariates)?;
        self.check_params(theta, psi)?;
        let n = self.trials(design.trial_count)?;
        let p = sigmoid(self.linear_predictor(&design.covariates, theta, psi));
        let dist = Binomial::new(n, p).map_err(|e| Error::Numerical(e.to_string()))?;
        Ok(Observation::new(
            design.clone(),
            Outcome::Count(dist.sample(rng)),
        ))
    }

    fn outcome_quadrature(
        &self,
        design: &Design,
        theta: &SharedParam,
        psi: &TaskParam,
    ) -> Result<Option<Vec<(Observation, f64)>>> {
        check_covariates(self, &design.covariates)?;
        let n = self.trials(design.trial_count)?;
        let nodes = (0..=n)
            .map(|y| {
                let w = self.log_pmf(y, n, &design.covariates, theta, psi).exp();
                (Observation::new(design.clone(), Outcome::Count(y)), w)
            })
            .collect();
        Ok(Some(nodes))
    }

    fn is_enumerable(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(theta: [f64; 4], psi: f64) -> (SharedParam, TaskParam) {
        (
            SharedParam::new(theta.to_vec()).unwrap(),
            TaskParam::scalar(psi),
        )
    }

    #[test]
    fn fair_coin() {
        let m = binomial_logit_model();
        let (t, p) = params([0.0; 4], 0.0);
        let obs = Observation::count(BinomialLogitModel::indicator(0), 0, Some(1));
        let ll = m.log_likelihood(&obs, &t, &p).unwrap();
        assert!((ll - 0.5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn saturates_toward_zero() {
        let m = binomial_logit_model();
        let (t, p) = params([10.0, 0.0, 0.0, 0.0], 10.0);
        let obs = Observation::count(BinomialLogitModel::indicator(0), 20, Some(20));
        let ll = m.log_likelihood(&obs, &t, &p).unwrap();
        assert!(ll < 0.0 && ll > -1e-6);
    }

    #[test]
    fn count_above_trials_is_rejected() {
        let m = binomial_logit_model();
        let (t, p) = params([0.0; 4], 0.0);
        let obs = Observation::count(BinomialLogitModel::indicator(1), 5, Some(4));
        assert!(matches!(
            m.log_likelihood(&obs, &t, &p),
            Err(Error::InvalidObservation(_))
        ));
        let missing = Observation::count(BinomialLogitModel::indicator(1), 1, None);
        assert!(m.log_likelihood(&missing, &t, &p).is_err());
    }

    #[test]
    fn no_mode_normalizer() {
        let m = binomial_logit_model();
        let (t, p) = params([0.0; 4], 0.0);
        let d = Design::with_trials(BinomialLogitModel::indicator(0), 3);
        assert!(matches!(
            m.log_mode_density(&d, &t, &p),
            Err(Error::Configuration(_))
        ));
    }
}
