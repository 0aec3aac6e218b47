use rand::RngCore;
use rand_distr::{weighted::WeightedIndex, Distribution};

use super::{Design, IntervalBox, Model, Observation, Outcome, SharedParam, TaskParam};
use crate::error::{Error, Result};

const ROW_TOLERANCE: f64 = 1e-12;

/// Categorical model on a finite parameter space. Parameters are node
/// indices stored as reals: `θ ∈ {0, …, theta_count − 1}` and likewise for `ψ`.
/// `table[θ][ψ][y]` is `p(y | θ, ψ)`.
#[derive(Debug, Clone)]
pub struct DiscreteToyModel {
    table: Vec<Vec<Vec<f64>>>,
    outcome_count: usize,
    theta_support: IntervalBox,
    psi_support: IntervalBox,
}

pub fn discrete_toy_model(
    outcome_count: usize,
    theta_count: usize,
    psi_count: usize,
    table: Vec<Vec<Vec<f64>>>,
) -> Result<DiscreteToyModel> {
    if outcome_count == 0 || theta_count == 0 || psi_count == 0 {
        return Err(Error::Validation(
            "toy model dimensions must be positive".into(),
        ));
    }
    if table.len() != theta_count || table.iter().any(|r| r.len() != psi_count) {
        return Err(Error::Validation(format!(
            "toy table must have shape {theta_count}x{psi_count}x{outcome_count}"
        )));
    }
    for (t, by_psi) in table.iter().enumerate() {
        for (p, row) in by_psi.iter().enumerate() {
            if row.len() != outcome_count {
                return Err(Error::Validation(format!(
                    "row ({t},{p}) has {} outcomes",
                    row.len()
                )));
            }
            if row.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::Validation(format!(
                    "row ({t},{p}) has invalid probabilities"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_TOLERANCE {
                return Err(Error::Validation(format!(
                    "row ({t},{p}) sums to {sum}, not 1"
                )));
            }
        }
    }
    Ok(DiscreteToyModel {
        table,
        outcome_count,
        theta_support: IntervalBox::cube(1, 0.0, (theta_count - 1) as f64),
        psi_support: IntervalBox::cube(1, 0.0, (psi_count - 1) as f64),
    })
}

impl DiscreteToyModel {
    pub fn outcome_count(&self) -> usize {
        self.outcome_count
    }

    pub fn theta_count(&self) -> usize {
        self.table.len()
    }

    pub fn psi_count(&self) -> usize {
        self.table[0].len()
    }

    pub fn row(&self, theta: usize, psi: usize) -> &[f64] {
        &self.table[theta][psi]
    }

    pub fn table(&self) -> &[Vec<Vec<f64>>] {
        &self.table
    }

    fn index(value: f64, count: usize, what: &str) -> Result<usize> {
        let idx = value.round();
        if (value - idx).abs() > 1e-9 || idx < 0.0 || idx as usize >= count {
            return Err(Error::Support(format!(
                "{what} {value} is not a node index below {count}"
            )));
        }
        Ok(idx as usize)
    }

    fn indices(&self, theta: &SharedParam, psi: &TaskParam) -> Result<(usize, usize)> {
        Ok((
            Self::index(theta[0], self.theta_count(), "theta")?,
            Self::index(psi[0], self.psi_count(), "psi")?,
        ))
    }

    fn outcome_index(&self, obs: &Observation) -> Result<usize> {
        match obs.outcome {
            Outcome::Count(y) if (y as usize) < self.outcome_count => Ok(y as usize),
            ref other => Err(Error::InvalidObservation(format!(
                "toy outcome must be a count below {}, got {other:?}",
                self.outcome_count
            ))),
        }
    }
}

impl Model for DiscreteToyModel {
    fn name(&self) -> &str {
        "discrete-toy"
    }

    fn covariate_dim(&self) -> usize {
        0
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
        let (t, p) = self.indices(theta, psi)?;
        let y = self.outcome_index(obs)?;
        Ok(self.table[t][p][y].ln())
    }

    fn simulate(
        &self,
        design: &Design,
        theta: &SharedParam,
        psi: &TaskParam,
        rng: &mut dyn RngCore,
    ) -> Result<Observation> {
        let (t, p) = self.indices(theta, psi)?;
        let dist =
            WeightedIndex::new(&self.table[t][p]).map_err(|e| Error::Numerical(e.to_string()))?;
        let y = dist.sample(rng) as u64;
        Ok(Observation::new(design.clone(), Outcome::Count(y)))
    }

    fn log_mode_density(
        &self,
        _design: &Design,
        theta: &SharedParam,
        psi: &TaskParam,
    ) -> Result<f64> {
        let (t, p) = self.indices(theta, psi)?;
        Ok(self.table[t][p].iter().copied().fold(0.0, f64::max).ln())
    }

    fn log_matched_mode_density(
        &self,
        _design: &Design,
        thetas: &[SharedParam],
        weights: &[f64],
        psi: &TaskParam,
    ) -> Result<f64> {
        let total: f64 = weights.iter().sum();
        let mut mixture = vec![0.0; self.outcome_count];
        for (theta, w) in thetas.iter().zip(weights) {
            let (t, p) = self.indices(theta, psi)?;
            for (acc, v) in mixture.iter_mut().zip(&self.table[t][p]) {
                *acc += w / total * v;
            }
        }
        Ok(mixture.into_iter().fold(0.0, f64::max).ln())
    }

    fn outcome_quadrature(
        &self,
        design: &Design,
        theta: &SharedParam,
        psi: &TaskParam,
    ) -> Result<Option<Vec<(Observation, f64)>>> {
        let (t, p) = self.indices(theta, psi)?;
        Ok(Some(
            self.table[t][p]
                .iter()
                .enumerate()
                .map(|(y, w)| {
                    (
                        Observation::new(design.clone(), Outcome::Count(y as u64)),
                        *w,
                    )
                })
                .collect(),
        ))
    }

    fn is_enumerable(&self) -> bool {
        true
    }
}
