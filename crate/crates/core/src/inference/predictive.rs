use rand::RngCore;
use rand_distr::{weighted::WeightedIndex, Distribution};

use super::posterior::PosteriorTable;
use crate::error::{Error, Result};
use crate::math::{log_sum_exp, LogSumExp};
use crate::model::{Design, Model, Observation, Outcome, SharedParam, TaskParam};

/// Posterior predictive at a fixed design: a finite mixture of model
/// likelihoods over `(θ, ψ)` components.
pub struct Predictive<'a> {
    model: &'a dyn Model,
    design: Design,
    components: Vec<(f64, SharedParam, TaskParam)>,
}

/// Predictive mixture of a grid posterior; zero-mass cells are dropped.
pub fn posterior_predictive<'a>(
    model: &'a dyn Model,
    table: &PosteriorTable,
    design: Design,
) -> Predictive<'a> {
    let grid = table.grid();
    let mut components = Vec::new();
    for (t, theta) in grid.theta_nodes().iter().enumerate() {
        for (p, psi) in grid.psi_nodes().iter().enumerate() {
            let lw = table.log_mass(t, p);
            if lw > f64::NEG_INFINITY {
                components.push((lw, theta.clone(), psi.clone()));
            }
        }
    }
    Predictive {
        model,
        design,
        components,
    }
}

impl<'a> Predictive<'a> {
    /// Equal-weight mixture over posterior draws.
    pub fn from_samples(
        model: &'a dyn Model,
        samples: &[(SharedParam, TaskParam)],
        design: Design,
    ) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Validation(
                "predictive needs at least one sample".into(),
            ));
        }
        let lw = -(samples.len() as f64).ln();
        Ok(Self {
            model,
            design,
            components: samples
                .iter()
                .map(|(t, p)| (lw, t.clone(), p.clone()))
                .collect(),
        })
    }

    pub fn design(&self) -> &Design {
        &self.design
    }

    pub fn component_count(&self) -> usize {
        self.components.len()
    }

    pub fn log_density(&self, outcome: &Outcome) -> Result<f64> {
        let obs = Observation::new(self.design.clone(), outcome.clone());
        let mut acc = LogSumExp::new();
        for (lw, theta, psi) in &self.components {
            acc.add(lw + self.model.log_likelihood(&obs, theta, psi)?);
        }
        Ok(acc.value())
    }

    /// Joint log predictive density of several outcomes that share one
    /// draw of `(θ, ψ)`.
    pub fn joint_log_density(&self, outcomes: &[Observation]) -> Result<f64> {
        let mut terms = Vec::with_capacity(self.components.len());
        for (lw, theta, psi) in &self.components {
            let ll: f64 = self
                .model
                .log_likelihood_batch(outcomes, theta, psi)?
                .iter()
                .sum();
            terms.push(lw + ll);
        }
        Ok(log_sum_exp(&terms))
    }

    pub fn sample(&self, rng: &mut dyn RngCore) -> Result<Observation> {
        let weights: Vec<f64> = self.components.iter().map(|(lw, _, _)| lw.exp()).collect();
        let pick = WeightedIndex::new(&weights).map_err(|e| Error::Numerical(e.to_string()))?;
        let (_, theta, psi) = &self.components[pick.sample(rng)];
        self.model.simulate(&self.design, theta, psi, rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::ParameterGrid;
    use crate::math::normal_log_pdf;
    use crate::model::linear_model;

    #[test]
    fn point_mass_equals_likelihood() {
        let m = linear_model();
        let grid = ParameterGrid::new(
            vec![SharedParam::scalar(-1.0), SharedParam::scalar(1.0)],
            vec![0.0, 1.0],
            vec![TaskParam::scalar(0.5)],
            vec![1.0],
        )
        .unwrap();
        let table =
            PosteriorTable::from_log_joint(grid.clone(), vec![f64::NEG_INFINITY, 0.0]).unwrap();
        let pred = posterior_predictive(&m, &table, Design::new(vec![1.0, 2.0]));
        let v = pred.log_density(&Outcome::Real(1.7)).unwrap();
        assert!((v - normal_log_pdf(1.7, 2.0, 1.0)).abs() < 1e-14);
    }

    #[test]
    fn two_component_midpoint() {
        let m = linear_model();
        let grid = ParameterGrid::new(
            vec![SharedParam::scalar(-1.0), SharedParam::scalar(1.0)],
            vec![0.5, 0.5],
            vec![TaskParam::scalar(0.0)],
            vec![1.0],
        )
        .unwrap();
        let table = PosteriorTable::from_log_joint(grid, vec![0.0, 0.0]).unwrap();
        let pred = posterior_predictive(&m, &table, Design::new(vec![1.0, 0.0]));
        let v = pred.log_density(&Outcome::Real(0.0)).unwrap().exp();
        let hand =
            0.5 * normal_log_pdf(0.0, -1.0, 1.0).exp() + 0.5 * normal_log_pdf(0.0, 1.0, 1.0).exp();
        assert!((v - hand).abs() < 1e-15);
    }
}
