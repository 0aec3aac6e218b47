use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use super::{
    check_covariates, Design, IntervalBox, Model, Observation, Outcome, SharedParam, TaskParam,
};
use crate::error::{Error, Result};
use crate::math::{normal_log_mode_density, normal_log_pdf, HALF_LN_2PI};

/// Half-width, in noise standard deviations, of the outcome quadrature window.
const QUADRATURE_HALF_WIDTH: f64 = 12.0;
const QUADRATURE_NODES: usize = 1201;

/// `y | x ~ Normal(θ·x₁ + ψ·x₂, 1)`.
#[derive(Debug, Clone)]
pub struct LinearModel {
    theta_support: IntervalBox,
    psi_support: IntervalBox,
    noise_sd: f64,
}

pub fn linear_model() -> LinearModel {
    LinearModel {
        theta_support: IntervalBox::cube(1, -10.0, 10.0),
        psi_support: IntervalBox::cube(1, -10.0, 10.0),
        noise_sd: 1.0,
    }
}

impl LinearModel {
    pub fn mean(&self, covariates: &[f64], theta: &SharedParam, psi: &TaskParam) -> f64 {
        theta[0] * covariates[0] + psi[0] * covariates[1]
    }

    pub fn noise_sd(&self) -> f64 {
        self.noise_sd
    }

    fn outcome(&self, obs: &Observation) -> Result<f64> {
        check_covariates(self, &obs.covariates)?;
        match obs.outcome {
            Outcome::Real(y) if y.is_finite() => Ok(y),
            ref other => Err(Error::InvalidObservation(format!(
                "linear model expects a finite real outcome, got {other:?}"
            ))),
        }
    }
}

impl Model for LinearModel {
    fn name(&self) -> &str {
        "linear"
    }

    fn covariate_dim(&self) -> usize {
        2
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
        let y = self.outcome(obs)?;
        self.check_params(theta, psi)?;
        Ok(normal_log_pdf(
            y,
            self.mean(&obs.covariates, theta, psi),
            self.noise_sd,
        ))
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
        let eps: f64 = StandardNormal.sample(rng);
        let y = self.mean(&design.covariates, theta, psi) + self.noise_sd * eps;
        Ok(Observation::new(design.clone(), Outcome::Real(y)))
    }

    fn log_mode_density(
        &self,
        _design: &Design,
        _theta: &SharedParam,
        _psi: &TaskParam,
    ) -> Result<f64> {
        Ok(normal_log_mode_density(self.noise_sd))
    }

    fn log_matched_mode_density(
        &self,
        design: &Design,
        thetas: &[SharedParam],
        weights: &[f64],
        psi: &TaskParam,
    ) -> Result<f64> {
        check_covariates(self, &design.covariates)?;
        let means = thetas
            .iter()
            .map(|t| {
                self.check_params(t, psi)?;
                Ok(self.mean(&design.covariates, t, psi))
            })
            .collect::<Result<Vec<_>>>()?;
        let total: f64 = weights.iter().sum();
        let m: f64 = means.iter().zip(weights).map(|(m, w)| m * w).sum::<f64>() / total;
        let spread: f64 = means
            .iter()
            .zip(weights)
            .map(|(x, w)| w * (x - m) * (x - m))
            .sum::<f64>()
            / total;
        let var = self.noise_sd() * self.noise_sd() + spread;
        Ok(-HALF_LN_2PI - 0.5 * var.ln())
    }

    fn outcome_quadrature(
        &self,
        design: &Design,
        theta: &SharedParam,
        psi: &TaskParam,
    ) -> Result<Option<Vec<(Observation, f64)>>> {
        check_covariates(self, &design.covariates)?;
        let mean = self.mean(&design.covariates, theta, psi);
        let half = QUADRATURE_HALF_WIDTH * self.noise_sd;
        let h = 2.0 * half / (QUADRATURE_NODES - 1) as f64;
        let nodes = (0..QUADRATURE_NODES)
            .map(|k| {
                let y = mean - half + k as f64 * h;
                let end = if k == 0 || k == QUADRATURE_NODES - 1 {
                    0.5
                } else {
                    1.0
                };
                let w = end * h * normal_log_pdf(y, mean, self.noise_sd).exp();
                (Observation::new(design.clone(), Outcome::Real(y)), w)
            })
            .collect();
        Ok(Some(nodes))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::HALF_LN_2PI;
    use crate::rng::seeded_rng;

    #[test]
    fn density_at_mean_and_one_sigma() {
        let m = linear_model();
        let theta = SharedParam::scalar(2.5);
        let at_mean = Observation::real(vec![1.0, 0.0], 2.5);
        let ll = m
            .log_likelihood(&at_mean, &theta, &TaskParam::scalar(-7.0))
            .unwrap();
        assert!((ll + HALF_LN_2PI).abs() < 1e-15);

        let psi = TaskParam::scalar(0.3);
        let one_sigma = Observation::real(vec![0.0, 1.0], 1.3);
        let ll = m
            .log_likelihood(&one_sigma, &SharedParam::scalar(5.0), &psi)
            .unwrap();
        assert!((ll - (-HALF_LN_2PI - 0.5)).abs() < 1e-12);
    }

    #[test]
    fn simulate_mean_matches() {
        let m = linear_model();
        let mut rng = seeded_rng(11);
        let design = Design::new(vec![1.0, 1.0]);
        let (theta, psi) = (SharedParam::scalar(-1.0), TaskParam::scalar(2.0));
        let n = 100_000;
        let mean = (0..n)
            .map(|_| {
                m.simulate(&design, &theta, &psi, &mut rng)
                    .unwrap()
                    .outcome
                    .as_real()
                    .unwrap()
            })
            .sum::<f64>()
            / n as f64;
        assert!((mean - 1.0).abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn rejects_bad_input() {
        let m = linear_model();
        let (t, p) = (SharedParam::scalar(0.0), TaskParam::scalar(0.0));
        assert!(m
            .log_likelihood(&Observation::real(vec![1.0], 0.0), &t, &p)
            .is_err());
        assert!(m
            .log_likelihood(
                &Observation::real(vec![1.0, 0.0], 0.0),
                &SharedParam::scalar(11.0),
                &p
            )
            .is_err());
    }

    #[test]
    fn quadrature_integrates_to_one() {
        let m = linear_model();
        let q = m
            .outcome_quadrature(
                &Design::new(vec![0.7, -1.2]),
                &SharedParam::scalar(3.0),
                &TaskParam::scalar(-4.0),
            )
            .unwrap()
            .unwrap();
        let total: f64 = q.iter().map(|(_, w)| w).sum();
        assert!((total - 1.0).abs() < 1e-6);
    }

    #[test]
    fn matched_mode_widens_with_spread() {
        let m = linear_model();
        let d = Design::new(vec![2.0, 1.0]);
        let psi = TaskParam::scalar(0.0);
        let point = m
            .log_matched_mode_density(&d, &[SharedParam::scalar(0.3)], &[1.0], &psi)
            .unwrap();
        assert!((point + HALF_LN_2PI).abs() < 1e-15);
        let two = [SharedParam::scalar(-1.0), SharedParam::scalar(1.0)];
        let spread = m
            .log_matched_mode_density(&d, &two, &[0.5, 0.5], &psi)
            .unwrap();
        assert!((spread - (-HALF_LN_2PI - 0.5 * 5.0f64.ln())).abs() < 1e-14);
    }
}
