//! Information gain, misspecification and fidelity measures, plus exact
//! checks of the negative-transfer bound and the misspecification
//! decomposition on enumerable instances.
//!
//! Quantities are computed by exact enumeration of the dataset space when the
//! model's outcome space is finite and small, and by seeded Monte Carlo with
//! a standard error otherwise.

mod checks;
mod divergence;
mod information;
mod misspecification;

pub use checks::{
    check_decomposition, check_information_bound, diagnose_discrete, DecompositionCheck,
    DiagnosticsReport, InformationBoundCheck,
};
pub use divergence::{cross_entropy, entropy, kl_divergence, kl_divergence_log, support_violation};
pub use information::{
    info_gain_classic, info_gain_rweighted, log_posterior_ratio, realized_info_gain,
    ProxyExpectation, ProxyModel, RealizedGain, RelevanceSource, UninformativeProxyModel,
};
pub use misspecification::{
    delta_classic, delta_rweighted, delta_rweighted_enumerated, ess_dis, rho_fidelity, DeltaVariant,
};

use rand::RngCore;

use crate::error::{Error, Result};
use crate::model::{Design, Model, Observation, SharedParam, TaskParam};

/// Largest number of datasets enumerated before falling back to Monte Carlo.
pub const MAX_ENUMERATED_DATASETS: usize = 1 << 20;

/// The data-generating process: `θ*`, one `ψᵢ*` and design per source
/// observation, and the target's `ψ*_{n+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrueProcess {
    pub theta_star: SharedParam,
    pub psi_star: Vec<TaskParam>,
    pub psi_target_star: TaskParam,
    pub designs: Vec<Design>,
}

impl TrueProcess {
    pub fn new(
        model: &dyn Model,
        theta_star: SharedParam,
        psi_star: Vec<TaskParam>,
        psi_target_star: TaskParam,
        designs: Vec<Design>,
    ) -> Result<Self> {
        if psi_star.is_empty() || psi_star.len() != designs.len() {
            return Err(Error::Validation(
                "need one true psi and one design per observation".into(),
            ));
        }
        for psi in psi_star.iter().chain(std::iter::once(&psi_target_star)) {
            model.check_params(&theta_star, psi)?;
        }
        Ok(Self {
            theta_star,
            psi_star,
            psi_target_star,
            designs,
        })
    }

    pub fn n(&self) -> usize {
        self.designs.len()
    }

    pub fn simulate(&self, model: &dyn Model, rng: &mut dyn RngCore) -> Result<Vec<Observation>> {
        self.designs
            .iter()
            .zip(&self.psi_star)
            .map(|(d, psi)| model.simulate(d, &self.theta_star, psi, rng))
            .collect()
    }

    /// `log P_{D*}(d)`.
    pub fn log_prob(&self, model: &dyn Model, data: &[Observation]) -> Result<f64> {
        let mut total = 0.0;
        for (obs, psi) in data.iter().zip(&self.psi_star) {
            total += model.log_likelihood(obs, &self.theta_star, psi)?;
        }
        Ok(total)
    }

    /// Per-observation outcome enumeration under the true process, if the
    /// model's outcome space is finite.
    fn marginal_outcomes(&self, model: &dyn Model) -> Result<Option<Vec<Vec<(Observation, f64)>>>> {
        if !model.is_enumerable() {
            return Ok(None);
        }
        let mut out = Vec::with_capacity(self.n());
        for (design, psi) in self.designs.iter().zip(&self.psi_star) {
            match model.outcome_quadrature(design, &self.theta_star, psi)? {
                Some(q) => out.push(q),
                None => return Ok(None),
            }
        }
        Ok(Some(out))
    }

    /// Every dataset with positive probability under `P_{D*}` and its
    /// probability, or `None` when the model is not enumerable or the space
    /// exceeds [`MAX_ENUMERATED_DATASETS`].
    pub fn enumerate_datasets(
        &self,
        model: &dyn Model,
    ) -> Result<Option<Vec<(Vec<Observation>, f64)>>> {
        let Some(marginals) = self.marginal_outcomes(model)? else {
            return Ok(None);
        };
        let marginals: Vec<Vec<(Observation, f64)>> = marginals
            .into_iter()
            .map(|m| m.into_iter().filter(|(_, w)| *w > 0.0).collect())
            .collect();
        let size = marginals
            .iter()
            .try_fold(1usize, |acc, m| acc.checked_mul(m.len()));
        match size {
            Some(s) if s <= MAX_ENUMERATED_DATASETS => {}
            _ => return Ok(None),
        }
        let mut datasets: Vec<(Vec<Observation>, f64)> = vec![(Vec::new(), 1.0)];
        for m in &marginals {
            let mut next = Vec::with_capacity(datasets.len() * m.len());
            for (d, w) in &datasets {
                for (obs, wo) in m {
                    let mut e = d.clone();
                    e.push(obs.clone());
                    next.push((e, w * wo));
                }
            }
            datasets = next;
        }
        Ok(Some(datasets))
    }

    /// Entropy of `P_{D*}`; it factorizes across observations. Exact for
    /// enumerable models, quadrature otherwise.
    pub fn entropy(&self, model: &dyn Model) -> Result<f64> {
        let mut total = 0.0;
        for (design, psi) in self.designs.iter().zip(&self.psi_star) {
            let q = model
                .outcome_quadrature(design, &self.theta_star, psi)?
                .ok_or_else(|| {
                    Error::Configuration(format!(
                        "model '{}' has no outcome quadrature",
                        model.name()
                    ))
                })?;
            for (obs, w) in q {
                if w > 0.0 {
                    total -= w * model.log_likelihood(&obs, &self.theta_star, psi)?;
                }
            }
        }
        Ok(total)
    }
}

/// A diagnostic value with its Monte Carlo standard error (zero when exact).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    pub exact: bool,
    /// Distance from the true `θ*` to the grid node it was snapped to.
    pub snap_distance: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self {
            value,
            std_error: 0.0,
            exact: true,
            snap_distance: 0.0,
        }
    }

    fn from_samples(values: &[f64]) -> Self {
        let (value, std_error) = crate::math::mean_and_se(values);
        Self {
            value,
            std_error: if values.len() < 2 {
                f64::NAN
            } else {
                std_error
            },
            exact: false,
            snap_distance: 0.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::discrete_toy_model;

    #[test]
    fn enumeration_sums_to_one() {
        let m = discrete_toy_model(
            3,
            2,
            2,
            vec![vec![vec![0.2, 0.3, 0.5], vec![0.6, 0.4, 0.0]]; 2],
        )
        .unwrap();
        let tp = TrueProcess::new(
            &m,
            SharedParam::scalar(1.0),
            vec![
                TaskParam::scalar(0.0),
                TaskParam::scalar(1.0),
                TaskParam::scalar(0.0),
            ],
            TaskParam::scalar(1.0),
            vec![Design::default(); 3],
        )
        .unwrap();
        let sets = tp.enumerate_datasets(&m).unwrap().unwrap();
        assert_eq!(sets.len(), 3 * 2 * 3);
        assert!((sets.iter().map(|(_, w)| w).sum::<f64>() - 1.0).abs() < 1e-15);
        let h = tp.entropy(&m).unwrap();
        let direct: f64 = sets.iter().map(|(_, w)| -w * w.ln()).sum();
        assert!((h - direct).abs() < 1e-13);
    }
}
