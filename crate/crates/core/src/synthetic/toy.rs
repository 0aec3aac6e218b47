use std::sync::Arc;

use rand::{Rng, RngCore};
use rand_distr::{Distribution, Exp1};

use crate::diagnostics::{ProxyModel, TrueProcess};
use crate::error::{Error, Result};
use crate::grid::ParameterGrid;
use crate::inference::{ProxyObservation, ProxyPayload};
use crate::model::{
    discrete_toy_model, Design, DiscreteToyModel, Observation, SharedParam, TaskParam,
};
use crate::relevance::RelevanceProvider;

/// Sizes of a random discrete instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ToySpec {
    pub theta_count: usize,
    pub psi_count: usize,
    pub outcome_count: usize,
    pub n: usize,
    pub proxy_outcomes: usize,
}

impl Default for ToySpec {
    fn default() -> Self {
        Self {
            theta_count: 3,
            psi_count: 3,
            outcome_count: 3,
            n: 3,
            proxy_outcomes: 2,
        }
    }
}

impl ToySpec {
    pub fn validate(&self) -> Result<()> {
        if self.theta_count == 0
            || self.psi_count == 0
            || self.outcome_count == 0
            || self.n == 0
            || self.proxy_outcomes == 0
        {
            return Err(Error::Validation(
                "toy instance sizes must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Sizes drawn uniformly with `|θ|, |ψ| ≤ 3`, `|outcomes| ≤ 4`, `n ≤ 4`.
    pub fn random(rng: &mut dyn RngCore) -> Self {
        Self {
            theta_count: rng.random_range(2..=3),
            psi_count: rng.random_range(1..=3),
            outcome_count: rng.random_range(2..=4),
            n: rng.random_range(1..=4),
            proxy_outcomes: rng.random_range(1..=3),
        }
    }
}

/// Flat-Dirichlet draw of length `k`.
fn simplex(k: usize, rng: &mut dyn RngCore) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

/// Relevance looked up from a table indexed by ψ node, observation index and
/// observed outcome, so weights depend on the data.
#[derive(Debug, Clone)]
pub struct TableRelevance {
    table: Vec<Vec<Vec<f64>>>,
}

impl TableRelevance {
    pub fn new(table: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        if table
            .iter()
            .flatten()
            .flatten()
            .any(|w| !(0.0..=1.0).contains(w))
        {
            return Err(Error::Validation(
                "table relevance entries must lie in [0, 1]".into(),
            ));
        }
        Ok(Self { table })
    }
}

impl RelevanceProvider for TableRelevance {
    fn weights(
        &self,
        data: &[Observation],
        psi_index: usize,
        _psi: &TaskParam,
    ) -> Result<Vec<f64>> {
        data.iter()
            .enumerate()
            .map(|(i, obs)| {
                let y = obs.outcome.as_count().ok_or_else(|| {
                    Error::InvalidObservation("toy relevance expects count outcomes".into())
                })?;
                self.table
                    .get(psi_index)
                    .and_then(|rows| rows.get(i))
                    .and_then(|row| row.get(y as usize))
                    .copied()
                    .ok_or_else(|| {
                        Error::Validation(format!(
                            "no relevance entry for psi {psi_index}, obs {i}, outcome {y}"
                        ))
                    })
            })
            .collect()
    }
}

/// Categorical proxy `z | ψ` given by one probability row per ψ node.
#[derive(Debug, Clone)]
pub struct TableProxyModel {
    rows: Arc<Vec<Vec<f64>>>,
}

impl TableProxyModel {
    pub fn new(rows: Vec<Vec<f64>>) -> Self {
        Self {
            rows: Arc::new(rows),
        }
    }

    pub fn observation(&self, z: u64) -> ProxyObservation {
        let rows = Arc::clone(&self.rows);
        ProxyObservation::new(ProxyPayload::Count(z), move |payload, psi| match payload {
            ProxyPayload::Count(z) => rows
                .get(psi[0] as usize)
                .and_then(|r| r.get(*z as usize))
                .map_or(f64::NEG_INFINITY, |p| p.ln()),
            _ => f64::NEG_INFINITY,
        })
    }

    fn row(&self, psi: &TaskParam) -> Result<&[f64]> {
        self.rows
            .get(psi[0] as usize)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::Support(format!("proxy has no row for psi {}", psi[0])))
    }
}

impl ProxyModel for TableProxyModel {
    fn sample(&self, psi: &TaskParam, rng: &mut dyn RngCore) -> Result<Vec<ProxyObservation>> {
        let row = self.row(psi)?;
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut z = row.len() - 1;
        for (k, p) in row.iter().enumerate() {
            acc += p;
            if u < acc {
                z = k;
                break;
            }
        }
        Ok(vec![self.observation(z as u64)])
    }

    fn enumerate(&self, psi: &TaskParam) -> Result<Option<Vec<(Vec<ProxyObservation>, f64)>>> {
        Ok(Some(
            self.row(psi)?
                .iter()
                .enumerate()
                .map(|(z, p)| (vec![self.observation(z as u64)], *p))
                .collect(),
        ))
    }
}

/// A random discrete instance on which every diagnostic is exact.
#[derive(Debug, Clone)]
pub struct ToyInstance {
    pub model: DiscreteToyModel,
    pub grid: ParameterGrid,
    pub source_psi_prior: Vec<f64>,
    pub true_process: TrueProcess,
    pub relevance: TableRelevance,
    pub proxy: TableProxyModel,
}

/// Outcome tables, prior masses, proxy rows and relevance entries are flat
/// Dirichlet or uniform draws; `θ*` and every `ψ*` are uniform node indices.
pub fn gen_toy_instance(spec: ToySpec, rng: &mut dyn RngCore) -> Result<ToyInstance> {
    spec.validate()?;
    let table: Vec<Vec<Vec<f64>>> = (0..spec.theta_count)
        .map(|_| {
            (0..spec.psi_count)
                .map(|_| simplex(spec.outcome_count, rng))
                .collect()
        })
        .collect();
    let model = discrete_toy_model(spec.outcome_count, spec.theta_count, spec.psi_count, table)?;
    let grid =
        ParameterGrid::indexed(simplex(spec.theta_count, rng), simplex(spec.psi_count, rng))?;
    let source_psi_prior = grid.psi_prior_mass().to_vec();
    let psi = |rng: &mut dyn RngCore| TaskParam::scalar(rng.random_range(0..spec.psi_count) as f64);
    let theta_star = SharedParam::scalar(rng.random_range(0..spec.theta_count) as f64);
    let psi_star: Vec<TaskParam> = (0..spec.n).map(|_| psi(rng)).collect();
    let psi_target = psi(rng);
    let true_process = TrueProcess::new(
        &model,
        theta_star,
        psi_star,
        psi_target,
        vec![Design::default(); spec.n],
    )?;
    let relevance = TableRelevance::new(
        (0..spec.psi_count)
            .map(|_| {
                (0..spec.n)
                    .map(|_| {
                        (0..spec.outcome_count)
                            .map(|_| rng.random::<f64>())
                            .collect()
                    })
                    .collect()
            })
            .collect(),
    )?;
    let proxy = TableProxyModel::new(
        (0..spec.psi_count)
            .map(|_| simplex(spec.proxy_outcomes, rng))
            .collect(),
    );
    Ok(ToyInstance {
        model,
        grid,
        source_psi_prior,
        true_process,
        relevance,
        proxy,
    })
}
