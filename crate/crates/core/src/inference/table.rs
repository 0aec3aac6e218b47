use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::ParameterGrid;
use crate::model::{Model, Observation};

/// `log p(dᵢ | θ_t, ψᵢ = ψ_p)` for every θ node, ψ node and observation.
///
/// Every grid engine reads this table, so the model is evaluated once per
/// `(t, p, i)` regardless of how many posteriors are formed.
#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodTable {
    n_theta: usize,
    n_psi: usize,
    n_obs: usize,
    values: Vec<f64>,
}

impl LikelihoodTable {
    pub fn build(model: &dyn Model, data: &[Observation], grid: &ParameterGrid) -> Result<Self> {
        let n_theta = grid.theta_len();
        let n_psi = grid.psi_len();
        let n_obs = data.len();
        let rows: Vec<Vec<f64>> = (0..n_theta * n_psi)
            .into_par_iter()
            .map(|cell| {
                let (t, p) = (cell / n_psi, cell % n_psi);
                model.log_likelihood_batch(data, &grid.theta_nodes()[t], &grid.psi_nodes()[p])
            })
            .collect::<Result<_>>()?;
        let mut values = Vec::with_capacity(n_theta * n_psi * n_obs);
        for row in rows {
            if let Some(index) = row.iter().position(|v| v.is_nan()) {
                return Err(Error::NanLikelihood { index });
            }
            values.extend(row);
        }
        Ok(Self {
            n_theta,
            n_psi,
            n_obs,
            values,
        })
    }

    /// Table from a closure, for callers that already hold the values.
    pub fn from_fn(
        n_theta: usize,
        n_psi: usize,
        n_obs: usize,
        f: impl Fn(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(n_theta * n_psi * n_obs);
        for t in 0..n_theta {
            for p in 0..n_psi {
                for i in 0..n_obs {
                    let v = f(t, p, i);
                    if v.is_nan() {
                        return Err(Error::NanLikelihood { index: i });
                    }
                    values.push(v);
                }
            }
        }
        Ok(Self {
            n_theta,
            n_psi,
            n_obs,
            values,
        })
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn n_psi(&self) -> usize {
        self.n_psi
    }

    pub fn n_obs(&self) -> usize {
        self.n_obs
    }

    /// Log-likelihoods of all observations at `(θ_t, ψ_p)`.
    #[inline]
    pub fn row(&self, t: usize, p: usize) -> &[f64] {
        let start = (t * self.n_psi + p) * self.n_obs;
        &self.values[start..start + self.n_obs]
    }

    #[inline]
    pub fn get(&self, t: usize, p: usize, i: usize) -> f64 {
        self.values[(t * self.n_psi + p) * self.n_obs + i]
    }

    pub(crate) fn check_grid(&self, grid: &ParameterGrid) -> Result<()> {
        if grid.theta_len() != self.n_theta || grid.psi_len() != self.n_psi {
            return Err(Error::Validation(
                "likelihood table does not match the grid".into(),
            ));
        }
        Ok(())
    }
}
