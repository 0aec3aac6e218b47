//! Seeded, parallel simulation sweeps.
//!
//! Simulation `i` of a run (counted across all sweep cells) draws from the
//! stream `task_rng(master_seed, i)`, so results do not depend on the number
//! of worker threads. Results are returned in simulation order.

use std::sync::Arc;
use std::time::Instant;

use prompt_core::diagnostics::{
    diagnose_discrete, realized_info_gain, DiagnosticsReport, ProxyExpectation,
};
use prompt_core::grid::{GridAxis, ParameterGrid, Prior};
use prompt_core::model::{linear_model, Model};
use prompt_core::relevance::RelevanceConfig;
use prompt_core::rng::{derive_seed, seeded_rng};
use prompt_core::synthetic::{
    gen_gp_trajectories_with, gen_linear_scenario, gen_toy_instance, ExpertProxyModel, GpScenario,
    LinearScenario, ToySpec, GP_PSI_PRIOR, GP_THETA_PRIOR, LINEAR_THETA_STAR,
};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::{HarnessError, Result};

/// Fraction of failed simulations above which a run fails.
pub const MAX_FAILURE_FRACTION: f64 = 0.2;

const LINEAR_SUPPORT: (f64, f64) = (-10.0, 10.0);
const GP_SUPPORT: (f64, f64) = (0.05, 12.0);

/// Outcome of one simulation. `advantage` is `ig_rweighted − ig_classic`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    pub group: String,
    pub simulation: usize,
    pub seed: u64,
    pub ig_classic: f64,
    pub ig_rweighted: f64,
    pub advantage: f64,
    pub snap_distance: f64,
    pub clipped_weights: usize,
    pub diagnostics: Option<DiagnosticsReport>,
    pub error: Option<String>,
    /// Excluded from the results CSV so reruns are byte-identical.
    pub wall_time_ms: u64,
}

impl SimulationResult {
    fn failed(
        group: String,
        simulation: usize,
        seed: u64,
        error: String,
        wall_time_ms: u64,
    ) -> Self {
        Self {
            group,
            simulation,
            seed,
            ig_classic: f64::NAN,
            ig_rweighted: f64::NAN,
            advantage: f64::NAN,
            snap_distance: f64::NAN,
            clipped_weights: 0,
            diagnostics: None,
            error: Some(error),
            wall_time_ms,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

struct Gains {
    ig_classic: f64,
    ig_rweighted: f64,
    snap_distance: f64,
    clipped: usize,
    diagnostics: Option<DiagnosticsReport>,
}

/// A sweep cell: its label and how to run one simulation of it.
enum Cell {
    Linear(LinearScenario),
    Gp(GpScenario),
    Toy(Option<ToySpec>),
}

impl Cell {
    fn label(&self) -> String {
        match self {
            Cell::Linear(s) => format!(
                "rho={} resemblance={} contamination={}",
                s.multicollinearity, s.target_resemblance_pct, s.contamination_pct
            ),
            Cell::Gp(s) => format!(
                "ms={} res={} T={} mt={} theta={} contamination={}",
                s.m_source,
                s.resolution,
                s.refinement_t,
                s.m_target,
                s.theta_star,
                s.contamination_pct
            ),
            Cell::Toy(_) => "toy".into(),
        }
    }
}

pub fn linear_grid(resolution: usize) -> prompt_core::Result<ParameterGrid> {
    let prior = Prior::Normal { mean: 0.0, sd: 1.0 };
    let (lo, hi) = LINEAR_SUPPORT;
    ParameterGrid::scalar((lo, hi, resolution, prior), (lo, hi, resolution, prior))
}

pub fn gp_grid(resolution: usize) -> prompt_core::Result<ParameterGrid> {
    let (lo, hi) = GP_SUPPORT;
    ParameterGrid::from_axes(
        &[(GridAxis::uniform(lo, hi, resolution)?, GP_THETA_PRIOR)],
        &[(GridAxis::uniform(lo, hi, resolution)?, GP_PSI_PRIOR)],
    )
}

fn run_linear(
    scenario: &LinearScenario,
    grid: &ParameterGrid,
    relevance: &RelevanceConfig,
    seed: u64,
) -> prompt_core::Result<Gains> {
    let mut rng = seeded_rng(seed);
    let model: Arc<dyn Model> = Arc::new(linear_model());
    let inst = gen_linear_scenario(scenario, &mut rng)?;
    let expert = ExpertProxyModel::new(
        Arc::clone(&model),
        inst.prompts,
        grid,
        scenario.contamination_pct,
        relevance.normalizer,
    )?;
    let (ratings, _) = expert.draw_ratings(&inst.true_process.psi_target_star, &mut rng)?;
    let proxy = expert.observations(&ratings);
    let g = realized_info_gain(
        model.as_ref(),
        &inst.source,
        grid,
        grid.psi_prior_mass(),
        relevance,
        &proxy,
        &[LINEAR_THETA_STAR],
    )?;
    Ok(Gains {
        ig_classic: g.ig_classic,
        ig_rweighted: g.ig_rweighted,
        snap_distance: g.snap_distance,
        clipped: g.clipped,
        diagnostics: None,
    })
}

fn run_gp(
    scenario: &GpScenario,
    grid: &ParameterGrid,
    relevance: &RelevanceConfig,
    seed: u64,
) -> prompt_core::Result<Gains> {
    let mut rng = seeded_rng(seed);
    let inst = gen_gp_trajectories_with(scenario, &mut rng)?;
    let model: Arc<dyn Model> = Arc::new(inst.model);
    let expert = ExpertProxyModel::new(
        Arc::clone(&model),
        inst.prompts,
        grid,
        scenario.contamination_pct,
        relevance.normalizer,
    )?;
    let (ratings, _) = expert.draw_ratings(&inst.true_process.psi_target_star, &mut rng)?;
    let proxy = expert.observations(&ratings);
    let config = RelevanceConfig {
        refinement_iterations: scenario.refinement_t,
        ..*relevance
    };
    let g = realized_info_gain(
        model.as_ref(),
        &inst.source,
        grid,
        grid.psi_prior_mass(),
        &config,
        &proxy,
        &[scenario.theta_star],
    )?;
    Ok(Gains {
        ig_classic: g.ig_classic,
        ig_rweighted: g.ig_rweighted,
        snap_distance: g.snap_distance,
        clipped: g.clipped,
        diagnostics: None,
    })
}

fn run_toy(spec: Option<ToySpec>, seed: u64) -> prompt_core::Result<Gains> {
    let mut rng = seeded_rng(seed);
    let spec = spec.unwrap_or_else(|| ToySpec::random(&mut rng));
    let inst = gen_toy_instance(spec, &mut rng)?;
    let report = diagnose_discrete(
        &inst.model,
        &inst.true_process,
        &inst.grid,
        &inst.source_psi_prior,
        &inst.relevance,
        &inst.proxy,
        ProxyExpectation::LearnerSubjective,
    )?;
    Ok(Gains {
        ig_classic: report.ig_classic,
        ig_rweighted: report.ig_rweighted,
        snap_distance: 0.0,
        clipped: 0,
        diagnostics: Some(report),
    })
}

fn cells(config: &ExperimentConfig) -> Result<Vec<Cell>> {
    Ok(match config.experiment {
        ExperimentKind::Linear => config
            .linear
            .scenarios()
            .into_iter()
            .map(Cell::Linear)
            .collect(),
        ExperimentKind::Gp => config.gp.scenarios().into_iter().map(Cell::Gp).collect(),
        ExperimentKind::ToyVerify => vec![Cell::Toy(
            (!config.toy.random_sizes).then(|| config.toy.spec()),
        )],
        ExperimentKind::Smoking => {
            return Err(HarnessError::Config(
                "smoking runs go through the smoking comparison, not the simulation sweep".into(),
            ))
        }
    })
}

/// Thread pool of `parallelism` workers; 0 uses rayon's default.
pub fn thread_pool(parallelism: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| HarnessError::Config(format!("thread pool: {e}")))
}

/// Runs `n_simulations` per sweep cell and checks the failure fraction.
/// More than [`MAX_FAILURE_FRACTION`] failures is a run-level error.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<SimulationResult>> {
    let results = run_simulations(config)?;
    check_failures(&results)?;
    Ok(results)
}

/// Runs `n_simulations` per sweep cell. Failed simulations are kept with
/// their error.
pub fn run_simulations(config: &ExperimentConfig) -> Result<Vec<SimulationResult>> {
    config.validate()?;
    let cells = cells(config)?;
    let relevance = config
        .relevance
        .config(config.relevance.refinement_iterations);
    let grid = match config.experiment {
        ExperimentKind::Linear => Some(linear_grid(config.grid_resolution)?),
        ExperimentKind::Gp => Some(gp_grid(config.grid_resolution)?),
        _ => None,
    };
    let labels: Vec<String> = cells.iter().map(Cell::label).collect();
    let n = config.n_simulations;
    let total = cells.len() * n;
    let pool = thread_pool(config.parallelism)?;
    let results: Vec<SimulationResult> = pool.install(|| {
        (0..total)
            .into_par_iter()
            .map(|index| {
                let cell = &cells[index / n];
                let seed = derive_seed(config.master_seed, index as u64);
                let start = Instant::now();
                let outcome = match (cell, &grid) {
                    (Cell::Linear(s), Some(g)) => run_linear(s, g, &relevance, seed),
                    (Cell::Gp(s), Some(g)) => run_gp(s, g, &relevance, seed),
                    (Cell::Toy(spec), _) => run_toy(*spec, seed),
                    _ => unreachable!("grid exists for grid experiments"),
                };
                let elapsed = start.elapsed().as_millis() as u64;
                let group = labels[index / n].clone();
                match outcome {
                    Ok(g) => SimulationResult {
                        group,
                        simulation: index,
                        seed,
                        ig_classic: g.ig_classic,
                        ig_rweighted: g.ig_rweighted,
                        advantage: g.ig_rweighted - g.ig_classic,
                        snap_distance: g.snap_distance,
                        clipped_weights: g.clipped,
                        diagnostics: g.diagnostics,
                        error: None,
                        wall_time_ms: elapsed,
                    },
                    Err(e) => SimulationResult::failed(group, index, seed, e.to_string(), elapsed),
                }
            })
            .collect()
    });
    Ok(results)
}

pub fn check_failures(results: &[SimulationResult]) -> Result<()> {
    let failed: Vec<&SimulationResult> = results.iter().filter(|r| !r.is_ok()).collect();
    if failed.len() as f64 > MAX_FAILURE_FRACTION * results.len() as f64 {
        return Err(HarnessError::FailureThreshold {
            failed: failed.len(),
            total: results.len(),
            first: failed[0].error.clone().unwrap_or_default(),
        });
    }
    Ok(())
}

/// Group labels in first-appearance order with each group's advantages.
pub fn advantages_by_group(results: &[SimulationResult]) -> Vec<(String, Vec<f64>)> {
    let mut groups: Vec<(String, Vec<f64>)> = Vec::new();
    for r in results.iter().filter(|r| r.is_ok()) {
        match groups.iter_mut().find(|(g, _)| *g == r.group) {
            Some((_, v)) => v.push(r.advantage),
            None => groups.push((r.group.clone(), vec![r.advantage])),
        }
    }
    groups
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toy_run_has_exact_decomposition() {
        let mut c = ExperimentConfig::new(ExperimentKind::ToyVerify);
        c.n_simulations = 1;
        let r = run_experiment(&c).unwrap();
        assert_eq!(r.len(), 1);
        let d = r[0].diagnostics.unwrap();
        assert!(d.decomposition_residual.abs() < 1e-9);
        assert_eq!(r[0].advantage, r[0].ig_rweighted - r[0].ig_classic);
    }

    #[test]
    fn failure_threshold() {
        let ok = |i| SimulationResult {
            group: "g".into(),
            simulation: i,
            seed: 0,
            ig_classic: 0.0,
            ig_rweighted: 0.0,
            advantage: 0.0,
            snap_distance: 0.0,
            clipped_weights: 0,
            diagnostics: None,
            error: None,
            wall_time_ms: 0,
        };
        let mut rs: Vec<_> = (0..5).map(ok).collect();
        rs[0] = SimulationResult::failed("g".into(), 0, 0, "boom".into(), 0);
        assert!(check_failures(&rs).is_ok());
        rs[1] = SimulationResult::failed("g".into(), 1, 0, "boom".into(), 0);
        let err = check_failures(&rs).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
