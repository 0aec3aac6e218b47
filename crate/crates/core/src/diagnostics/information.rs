use rand::{Rng, RngCore};
use rayon::prelude::*;

use super::{Estimate, TrueProcess};
use crate::error::{Error, Result};
use crate::grid::ParameterGrid;
use crate::inference::{
    classic_posterior_from_table, proxy_log_likelihoods, r_weighted_posterior_from_table,
    LikelihoodTable, PosteriorTable, ProxyObservation,
};
use crate::model::{Model, Observation, TaskParam};
use crate::relevance::{
    refine_relevance_with_table, RelevanceConfig, RelevanceProvider, RelevanceWeights,
};
use crate::rng::task_rng;

/// Generative model of proxy information given the target task parameter.
pub trait ProxyModel: Sync {
    fn sample(&self, psi: &TaskParam, rng: &mut dyn RngCore) -> Result<Vec<ProxyObservation>>;

    /// All proxy outcomes with their probabilities, when finite.
    fn enumerate(&self, _psi: &TaskParam) -> Result<Option<Vec<(Vec<ProxyObservation>, f64)>>> {
        Ok(None)
    }
}

/// Proxy model that always yields an uninformative observation.
pub struct UninformativeProxyModel;

impl ProxyModel for UninformativeProxyModel {
    fn sample(&self, _psi: &TaskParam, _rng: &mut dyn RngCore) -> Result<Vec<ProxyObservation>> {
        Ok(vec![ProxyObservation::uninformative()])
    }

    fn enumerate(&self, _psi: &TaskParam) -> Result<Option<Vec<(Vec<ProxyObservation>, f64)>>> {
        Ok(Some(vec![(vec![ProxyObservation::uninformative()], 1.0)]))
    }
}

/// Which distribution the proxy expectation is taken over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProxyExpectation {
    /// `z` generated under `ψ` drawn from the learner's grid prior.
    LearnerSubjective,
    /// `z` generated under the true `ψ*_{n+1}`.
    TrueTarget,
}

impl ProxyExpectation {
    pub fn label(&self) -> &'static str {
        match self {
            ProxyExpectation::LearnerSubjective => "learner-subjective",
            ProxyExpectation::TrueTarget => "true-proxy",
        }
    }
}

/// How relevance weights are obtained for a dataset.
#[derive(Clone, Copy)]
pub enum RelevanceSource<'a> {
    /// Relevance refinement with the given configuration.
    Refined(RelevanceConfig),
    /// A data-dependent weight function.
    Provider(&'a dyn RelevanceProvider),
}

/// `log p(θ_k | ·) − log p(θ_k)` for the θ-marginal of a posterior.
pub fn log_posterior_ratio(table: &PosteriorTable, theta_index: usize) -> f64 {
    let prior = table.grid().theta_prior_mass()[theta_index];
    table.log_theta_marginal()[theta_index] - prior.ln()
}

fn snap(grid: &ParameterGrid, tp: &TrueProcess) -> Result<(usize, f64)> {
    grid.nearest_theta(tp.theta_star.values())
}

fn monte_carlo<F>(n_outer: usize, seed: u64, f: F) -> Result<Estimate>
where
    F: Fn(&mut dyn RngCore) -> Result<f64> + Sync,
{
    if n_outer == 0 {
        return Err(Error::Validation(
            "Monte Carlo needs at least one outer sample".into(),
        ));
    }
    let values: Vec<f64> = (0..n_outer as u64)
        .into_par_iter()
        .map(|s| f(&mut task_rng(seed, s)))
        .collect::<Result<_>>()?;
    Ok(Estimate::from_samples(&values))
}

/// Expected log posterior-to-prior ratio at `θ*` under the classic
/// posterior. Exact when the dataset space can be enumerated.
pub fn info_gain_classic(
    model: &dyn Model,
    tp: &TrueProcess,
    grid: &ParameterGrid,
    source_psi_prior: &[f64],
    n_outer: usize,
    seed: u64,
) -> Result<Estimate> {
    let (k, snap_distance) = snap(grid, tp)?;
    let ratio = |data: &[Observation]| -> Result<f64> {
        let table = LikelihoodTable::build(model, data, grid)?;
        let post = classic_posterior_from_table(&table, grid, source_psi_prior, None)?;
        Ok(log_posterior_ratio(&post, k))
    };
    let mut est = match tp.enumerate_datasets(model)? {
        Some(sets) => {
            let mut total = 0.0;
            for (d, w) in &sets {
                total += w * ratio(d)?;
            }
            Estimate::exact(total)
        }
        None => monte_carlo(n_outer, seed, |rng| ratio(&tp.simulate(model, rng)?))?,
    };
    est.snap_distance = snap_distance;
    Ok(est)
}

/// Relevance-weighted posterior for one dataset and proxy outcome.
pub(crate) fn rweighted_for(
    model: &dyn Model,
    data: &[Observation],
    table: &LikelihoodTable,
    grid: &ParameterGrid,
    relevance: &RelevanceSource<'_>,
    proxy: &[ProxyObservation],
) -> Result<PosteriorTable> {
    let proxy_ll = proxy_log_likelihoods(grid, proxy)?;
    let weights = match relevance {
        RelevanceSource::Refined(config) => {
            refine_relevance_with_table(model, data, grid, table, &proxy_ll, config)?
                .weights_per_psi
        }
        RelevanceSource::Provider(provider) => grid
            .psi_nodes()
            .iter()
            .enumerate()
            .map(|(p, psi)| RelevanceWeights::new(Some(p), provider.weights(data, p, psi)?))
            .collect::<Result<_>>()?,
    };
    r_weighted_posterior_from_table(table, grid, &weights, &proxy_ll)
}

fn draw_proxy_psi(
    grid: &ParameterGrid,
    tp: &TrueProcess,
    mode: ProxyExpectation,
    rng: &mut dyn RngCore,
) -> TaskParam {
    match mode {
        ProxyExpectation::TrueTarget => tp.psi_target_star.clone(),
        ProxyExpectation::LearnerSubjective => {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            for (psi, m) in grid.psi_nodes().iter().zip(grid.psi_prior_mass()) {
                acc += m;
                if u < acc {
                    return psi.clone();
                }
            }
            grid.psi_nodes().last().expect("grid has psi nodes").clone()
        }
    }
}

/// Proxy outcomes and probabilities under the chosen expectation, if the
/// proxy model is enumerable.
fn enumerate_proxy(
    grid: &ParameterGrid,
    tp: &TrueProcess,
    proxy_model: &dyn ProxyModel,
    mode: ProxyExpectation,
) -> Result<Option<Vec<(Vec<ProxyObservation>, f64)>>> {
    match mode {
        ProxyExpectation::TrueTarget => proxy_model.enumerate(&tp.psi_target_star),
        ProxyExpectation::LearnerSubjective => {
            let mut out = Vec::new();
            for (psi, m) in grid.psi_nodes().iter().zip(grid.psi_prior_mass()) {
                if *m == 0.0 {
                    continue;
                }
                let Some(zs) = proxy_model.enumerate(psi)? else {
                    return Ok(None);
                };
                out.extend(zs.into_iter().map(|(z, w)| (z, w * m)));
            }
            Ok(Some(out))
        }
    }
}

/// Expected log posterior-to-prior ratio at `θ*` under the relevance-weighted
/// posterior, averaging over datasets and proxy information. Exact when both
/// the datasets and the proxy outcomes can be enumerated.
#[allow(clippy::too_many_arguments)]
pub fn info_gain_rweighted(
    model: &dyn Model,
    tp: &TrueProcess,
    grid: &ParameterGrid,
    relevance: &RelevanceSource<'_>,
    proxy_model: &dyn ProxyModel,
    expectation: ProxyExpectation,
    n_outer: usize,
    seed: u64,
) -> Result<Estimate> {
    let (k, snap_distance) = snap(grid, tp)?;
    let datasets = tp.enumerate_datasets(model)?;
    let proxies = enumerate_proxy(grid, tp, proxy_model, expectation)?;
    let mut est = match (datasets, proxies) {
        (Some(sets), Some(zs)) => {
            let mut total = 0.0;
            for (d, wd) in &sets {
                let table = LikelihoodTable::build(model, d, grid)?;
                for (z, wz) in &zs {
                    let post = rweighted_for(model, d, &table, grid, relevance, z)?;
                    total += wd * wz * log_posterior_ratio(&post, k);
                }
            }
            Estimate::exact(total)
        }
        _ => monte_carlo(n_outer, seed, |rng| {
            let d = tp.simulate(model, rng)?;
            let psi = draw_proxy_psi(grid, tp, expectation, rng);
            let z = proxy_model.sample(&psi, rng)?;
            let table = LikelihoodTable::build(model, &d, grid)?;
            let post = rweighted_for(model, &d, &table, grid, relevance, &z)?;
            Ok(log_posterior_ratio(&post, k))
        })?,
    };
    est.snap_distance = snap_distance;
    Ok(est)
}

/// Log posterior-to-prior ratios at `θ*` for one realized dataset and proxy.
#[derive(Debug, Clone, PartialEq)]
pub struct RealizedGain {
    pub ig_classic: f64,
    pub ig_rweighted: f64,
    pub snap_distance: f64,
    /// Relevance weights clipped at 1 across all ψ nodes.
    pub clipped: usize,
}

/// Single-draw information gains: the classic and r-weighted posteriors for
/// `data` and `proxy`, each evaluated at the grid node nearest `θ*`.
pub fn realized_info_gain(
    model: &dyn Model,
    data: &[Observation],
    grid: &ParameterGrid,
    source_psi_prior: &[f64],
    config: &RelevanceConfig,
    proxy: &[ProxyObservation],
    theta_star: &[f64],
) -> Result<RealizedGain> {
    let (k, snap_distance) = grid.nearest_theta(theta_star)?;
    let table = LikelihoodTable::build(model, data, grid)?;
    let classic = classic_posterior_from_table(&table, grid, source_psi_prior, None)?;
    let proxy_ll = proxy_log_likelihoods(grid, proxy)?;
    let refinement = refine_relevance_with_table(model, data, grid, &table, &proxy_ll, config)?;
    let rweighted =
        r_weighted_posterior_from_table(&table, grid, &refinement.weights_per_psi, &proxy_ll)?;
    Ok(RealizedGain {
        ig_classic: log_posterior_ratio(&classic, k),
        ig_rweighted: log_posterior_ratio(&rweighted, k),
        snap_distance,
        clipped: refinement.clipped(),
    })
}
