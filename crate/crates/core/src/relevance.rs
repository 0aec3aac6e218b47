//! Relevance functions `Rᵢ(ψ_{n+1})` and the iterative refinement that
//! replaces the prior belief over `θ` with successive relevance-weighted
//! posteriors.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::ParameterGrid;
use crate::inference::{
    proxy_log_likelihoods, r_weighted_posterior_from_table, LikelihoodTable, ProxyLikelihood,
};
use crate::math::{sigmoid, LogSumExp};
use crate::model::{Design, Model, Observation, SharedParam, TaskParam};

pub const MAX_REFINEMENT_ITERATIONS: usize = 10;

/// One weight per source observation for one candidate target ψ.
#[derive(Debug, Clone, PartialEq)]
pub struct RelevanceWeights {
    pub psi_node_index: Option<usize>,
    pub weights: Vec<f64>,
    /// Number of raw weights that exceeded 1 and were clipped.
    pub clipped: usize,
}

impl RelevanceWeights {
    pub fn new(psi_node_index: Option<usize>, weights: Vec<f64>) -> Result<Self> {
        if let Some(w) = weights
            .iter()
            .find(|w| !(w.is_finite() && (0.0..=1.0).contains(*w)))
        {
            return Err(Error::Validation(format!(
                "relevance weight {w} outside [0, 1]"
            )));
        }
        Ok(Self {
            psi_node_index,
            weights,
            clipped: 0,
        })
    }

    pub fn ones(psi_node_index: Option<usize>, n: usize) -> Self {
        Self {
            psi_node_index,
            weights: vec![1.0; n],
            clipped: 0,
        }
    }

    /// Effective sample size `Σᵢ wᵢ`.
    pub fn ess(&self) -> f64 {
        self.weights.iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelevanceKind {
    PriorExpected,
    SigmoidRatio,
    ConstantOne,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalizer {
    /// Divide by the belief-averaged outcome density at its mode.
    ModeDensity,
    /// Divide by the mode density of a distribution with the same variance
    /// as the belief-averaged outcome distribution.
    MatchedVariance,
    None,
}

impl Normalizer {
    pub fn label(&self) -> &'static str {
        match self {
            Normalizer::ModeDensity => "mode-density",
            Normalizer::MatchedVariance => "matched-variance",
            Normalizer::None => "none",
        }
    }
}

/// Precomputed denominator of the prior-expected relevance.
#[derive(Clone, Copy)]
pub enum Denominator<'a> {
    None,
    /// `log mode(θ, ψ, i)` laid out like a likelihood table.
    ModeTable(&'a LikelihoodTable),
    /// Evaluated per ψ node and observation under the current belief.
    Matched {
        model: &'a dyn Model,
        designs: &'a [Design],
        grid: &'a ParameterGrid,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RelevanceConfig {
    pub kind: RelevanceKind,
    pub refinement_iterations: usize,
    pub normalizer: Normalizer,
}

impl Default for RelevanceConfig {
    fn default() -> Self {
        Self {
            kind: RelevanceKind::PriorExpected,
            refinement_iterations: 3,
            normalizer: Normalizer::MatchedVariance,
        }
    }
}

impl RelevanceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.refinement_iterations > MAX_REFINEMENT_ITERATIONS {
            return Err(Error::Configuration(format!(
                "refinement iterations {} exceed the limit of {MAX_REFINEMENT_ITERATIONS}",
                self.refinement_iterations
            )));
        }
        Ok(())
    }
}

/// `log mode density` for every `(θ, ψ, i)`, laid out like a likelihood table.
pub fn mode_density_table(
    model: &dyn Model,
    data: &[Observation],
    grid: &ParameterGrid,
) -> Result<LikelihoodTable> {
    let designs: Vec<_> = data.iter().map(Observation::design).collect();
    let n_psi = grid.psi_len();
    let rows: Vec<Vec<f64>> = (0..grid.theta_len() * n_psi)
        .into_par_iter()
        .map(|cell| {
            model.log_mode_density_batch(
                &designs,
                &grid.theta_nodes()[cell / n_psi],
                &grid.psi_nodes()[cell % n_psi],
            )
        })
        .collect::<Result<_>>()?;
    LikelihoodTable::from_fn(grid.theta_len(), n_psi, data.len(), |t, p, i| {
        rows[t * n_psi + p][i]
    })
}

/// Prior-expected relevance at ψ node `p` from precomputed tables:
/// `wᵢ = Σ_θ b(θ) p(dᵢ | θ, ψ_p) / normalizerᵢ`, clipped at 1.
pub fn prior_expected_from_table(
    table: &LikelihoodTable,
    denominator: Denominator<'_>,
    theta_belief: &[f64],
    p: usize,
) -> Result<RelevanceWeights> {
    let n = table.n_obs();
    let log_belief: Vec<f64> = theta_belief.iter().map(|b| b.ln()).collect();
    let mut num = vec![LogSumExp::new(); n];
    let mut den = vec![LogSumExp::new(); n];
    for (t, lb) in log_belief.iter().enumerate() {
        if *lb == f64::NEG_INFINITY {
            continue;
        }
        for (i, l) in table.row(t, p).iter().enumerate() {
            num[i].add(lb + l);
        }
        if let Denominator::ModeTable(modes) = denominator {
            for (i, m) in modes.row(t, p).iter().enumerate() {
                den[i].add(lb + m);
            }
        }
    }
    let log_norm: Vec<f64> = match denominator {
        Denominator::None => vec![0.0; n],
        Denominator::ModeTable(_) => den.iter().map(LogSumExp::value).collect(),
        Denominator::Matched {
            model,
            designs,
            grid,
        } => {
            let (thetas, weights): (Vec<SharedParam>, Vec<f64>) = grid
                .theta_nodes()
                .iter()
                .zip(theta_belief)
                .filter(|(_, b)| **b > 0.0)
                .map(|(t, b)| (t.clone(), *b))
                .unzip();
            let psi = &grid.psi_nodes()[p];
            designs
                .iter()
                .map(|d| model.log_matched_mode_density(d, &thetas, &weights, psi))
                .collect::<Result<_>>()?
        }
    };
    let mut clipped = 0;
    let weights = (0..n)
        .map(|i| {
            let w = (num[i].value() - log_norm[i]).exp();
            if w > 1.0 {
                clipped += 1;
                1.0
            } else {
                w
            }
        })
        .collect();
    Ok(RelevanceWeights {
        psi_node_index: Some(p),
        weights,
        clipped,
    })
}

fn check_belief(belief: &[f64], len: usize) -> Result<()> {
    let total: f64 = belief.iter().sum();
    if belief.len() != len
        || belief.iter().any(|b| !(b.is_finite() && *b >= 0.0))
        || (total - 1.0).abs() > 1e-10
    {
        return Err(Error::Validation(
            "theta belief must be a normalized mass vector over the grid".into(),
        ));
    }
    Ok(())
}

/// Relevance of each observation to the target `psi_target`, averaging the
/// pseudo-intervened likelihood over a belief about `θ` on the grid nodes.
pub fn prior_expected_relevance(
    model: &dyn Model,
    data: &[Observation],
    grid: &ParameterGrid,
    theta_belief: &[f64],
    psi_target: &TaskParam,
    normalizer: Normalizer,
) -> Result<RelevanceWeights> {
    check_belief(theta_belief, grid.theta_len())?;
    let single = ParameterGrid::new(
        grid.theta_nodes().to_vec(),
        grid.theta_prior_mass().to_vec(),
        vec![psi_target.clone()],
        vec![1.0],
    )?;
    let table = LikelihoodTable::build(model, data, &single)?;
    let designs: Vec<Design> = data.iter().map(Observation::design).collect();
    let modes = match normalizer {
        Normalizer::ModeDensity => Some(mode_density_table(model, data, &single)?),
        _ => None,
    };
    let denominator = match (normalizer, &modes) {
        (Normalizer::ModeDensity, Some(m)) => Denominator::ModeTable(m),
        (Normalizer::MatchedVariance, _) => Denominator::Matched {
            model,
            designs: &designs,
            grid: &single,
        },
        _ => Denominator::None,
    };
    let mut w = prior_expected_from_table(&table, denominator, theta_belief, 0)?;
    w.psi_node_index = None;
    Ok(w)
}

/// Sigmoid-ratio weights from pseudo-intervened log-likelihoods at `θ = 0`:
/// `wᵢ = sigmoid(n · p(dᵢ) / Πⱼ p(dⱼ))`, saturating to 1 when the ratio
/// overflows.
pub fn sigmoid_ratio_weights(log_lik: &[f64]) -> Result<Vec<f64>> {
    let n = log_lik.len();
    let total: f64 = log_lik.iter().sum();
    if total == f64::NEG_INFINITY || total.is_nan() {
        return Err(Error::DegenerateRelevance(
            "source data have zero likelihood at theta = 0 under the candidate psi".into(),
        ));
    }
    let ln_n = (n as f64).ln();
    Ok(log_lik
        .iter()
        .map(|l| {
            let log_arg = ln_n + l - total;
            if log_arg > 700.0 {
                1.0
            } else {
                sigmoid(log_arg.exp())
            }
        })
        .collect())
}

pub fn sigmoid_ratio_relevance(
    model: &dyn Model,
    data: &[Observation],
    psi_target: &TaskParam,
) -> Result<RelevanceWeights> {
    let origin = SharedParam::new(vec![0.0; model.theta_dim()])?;
    if !model.theta_support().contains(&origin) {
        return Err(Error::Configuration(format!(
            "model '{}' does not admit theta = 0",
            model.name()
        )));
    }
    let ll = model.log_likelihood_batch(data, &origin, psi_target)?;
    RelevanceWeights::new(None, sigmoid_ratio_weights(&ll)?)
}

/// Output of [`refine_relevance`].
#[derive(Debug, Clone)]
pub struct Refinement {
    pub weights_per_psi: Vec<RelevanceWeights>,
    pub theta_belief: Vec<f64>,
    /// θ belief before each iteration followed by the final belief.
    pub history: Vec<Vec<f64>>,
}

impl Refinement {
    pub fn clipped(&self) -> usize {
        self.weights_per_psi.iter().map(|w| w.clipped).sum()
    }
}

/// Weights for every ψ node under the current θ belief.
pub fn weights_for_grid(
    model: &dyn Model,
    data: &[Observation],
    grid: &ParameterGrid,
    table: &LikelihoodTable,
    denominator: Denominator<'_>,
    belief: &[f64],
    kind: RelevanceKind,
) -> Result<Vec<RelevanceWeights>> {
    let np = grid.psi_len();
    match kind {
        RelevanceKind::ConstantOne => Ok((0..np)
            .map(|p| RelevanceWeights::ones(Some(p), data.len()))
            .collect()),
        RelevanceKind::PriorExpected => (0..np)
            .into_par_iter()
            .map(|p| prior_expected_from_table(table, denominator, belief, p))
            .collect(),
        RelevanceKind::SigmoidRatio => (0..np)
            .map(|p| {
                let mut w = sigmoid_ratio_relevance(model, data, &grid.psi_nodes()[p])?;
                w.psi_node_index = Some(p);
                Ok(w)
            })
            .collect(),
    }
}

/// Runs `T` rounds of: weights under the current belief, r-weighted
/// posterior, belief ← its θ-marginal. Returns the weights evaluated under
/// the final belief. Only prior-expected relevance depends on the belief;
/// other kinds skip the loop.
pub fn refine_relevance(
    model: &dyn Model,
    data: &[Observation],
    grid: &ParameterGrid,
    proxy: &(impl ProxyLikelihood + ?Sized),
    config: &RelevanceConfig,
) -> Result<Refinement> {
    let table = LikelihoodTable::build(model, data, grid)?;
    let proxy_ll = proxy_log_likelihoods(grid, proxy)?;
    refine_relevance_with_table(model, data, grid, &table, &proxy_ll, config)
}

pub fn refine_relevance_with_table(
    model: &dyn Model,
    data: &[Observation],
    grid: &ParameterGrid,
    table: &LikelihoodTable,
    proxy_ll: &[f64],
    config: &RelevanceConfig,
) -> Result<Refinement> {
    config.validate()?;
    let designs: Vec<Design> = data.iter().map(Observation::design).collect();
    let modes = match (config.kind, config.normalizer) {
        (RelevanceKind::PriorExpected, Normalizer::ModeDensity) => {
            Some(mode_density_table(model, data, grid)?)
        }
        _ => None,
    };
    let denominator = match (config.normalizer, &modes) {
        (Normalizer::ModeDensity, Some(m)) => Denominator::ModeTable(m),
        (Normalizer::MatchedVariance, _) => Denominator::Matched {
            model,
            designs: &designs,
            grid,
        },
        _ => Denominator::None,
    };
    refine_with_tables(model, data, grid, table, denominator, proxy_ll, config)
}

/// Refinement with the likelihood table and relevance denominator
/// precomputed.
pub fn refine_with_tables(
    model: &dyn Model,
    data: &[Observation],
    grid: &ParameterGrid,
    table: &LikelihoodTable,
    denominator: Denominator<'_>,
    proxy_ll: &[f64],
    config: &RelevanceConfig,
) -> Result<Refinement> {
    config.validate()?;
    let mut belief = grid.theta_prior_mass().to_vec();
    let mut history = vec![belief.clone()];
    let iterations = if config.kind == RelevanceKind::PriorExpected {
        config.refinement_iterations
    } else {
        0
    };
    for iteration in 0..iterations {
        let step = || -> Result<Vec<f64>> {
            let w = weights_for_grid(model, data, grid, table, denominator, &belief, config.kind)?;
            Ok(r_weighted_posterior_from_table(table, grid, &w, proxy_ll)?.theta_marginal())
        };
        belief = step().map_err(|e| Error::Refinement {
            iteration,
            source: Box::new(e),
        })?;
        history.push(belief.clone());
    }
    let weights_per_psi =
        weights_for_grid(model, data, grid, table, denominator, &belief, config.kind)?;
    Ok(Refinement {
        weights_per_psi,
        theta_belief: belief,
        history,
    })
}

/// Data-dependent relevance, as needed by the diagnostics that average over
/// datasets: weights for dataset `data` at ψ node `psi_index`.
pub trait RelevanceProvider: Sync {
    fn weights(&self, data: &[Observation], psi_index: usize, psi: &TaskParam) -> Result<Vec<f64>>;
}

/// Provider wrapping a closure.
pub struct FnRelevance<F>(pub F);

impl<F> RelevanceProvider for FnRelevance<F>
where
    F: Fn(&[Observation], usize, &TaskParam) -> Result<Vec<f64>> + Sync,
{
    fn weights(&self, data: &[Observation], psi_index: usize, psi: &TaskParam) -> Result<Vec<f64>> {
        (self.0)(data, psi_index, psi)
    }
}

/// The same weight for every observation.
pub struct ConstantRelevance(pub f64);

impl RelevanceProvider for ConstantRelevance {
    fn weights(
        &self,
        data: &[Observation],
        _psi_index: usize,
        _psi: &TaskParam,
    ) -> Result<Vec<f64>> {
        Ok(vec![self.0; data.len()])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Prior;
    use crate::inference::ProxyObservation;
    use crate::math::{normal_log_pdf, HALF_LN_2PI};
    use crate::model::linear_model;

    #[test]
    fn sigmoid_ratio_examples() {
        let w = sigmoid_ratio_weights(&[-0.3]).unwrap();
        assert!((w[0] - sigmoid(1.0)).abs() < 1e-15);
        let half = 0.5f64.ln();
        let w = sigmoid_ratio_weights(&[half, half]).unwrap();
        assert!((w[0] - 0.982_013_790_037_908_4).abs() < 1e-15);
        assert_eq!(sigmoid_ratio_weights(&[-1.0, -2000.0]).unwrap()[0], 1.0);
        assert!(matches!(
            sigmoid_ratio_weights(&[f64::NEG_INFINITY, 0.0]),
            Err(Error::DegenerateRelevance(_))
        ));
    }

    #[test]
    fn point_belief_matches_direct_density() {
        let m = linear_model();
        let grid = ParameterGrid::scalar(
            (-2.0, 2.0, 5, Prior::Uniform),
            (-1.0, 1.0, 3, Prior::Uniform),
        )
        .unwrap();
        let data = vec![
            Observation::real(vec![1.0, 1.0], 0.5),
            Observation::real(vec![0.5, -1.0], 3.0),
        ];
        let belief = crate::grid::point_mass(5, 3);
        let psi = TaskParam::scalar(0.4);
        let w = prior_expected_relevance(&m, &data, &grid, &belief, &psi, Normalizer::ModeDensity)
            .unwrap();
        for (obs, w) in data.iter().zip(&w.weights) {
            let mean = 1.0 * obs.covariates[0] + 0.4 * obs.covariates[1];
            let direct =
                (normal_log_pdf(obs.outcome.as_real().unwrap(), mean, 1.0) + HALF_LN_2PI).exp();
            assert!((w - direct).abs() < 1e-14);
        }
        // Observation exactly at the mean has relevance one.
        let at_mean = vec![Observation::real(vec![1.0, 1.0], 1.4)];
        let w =
            prior_expected_relevance(&m, &at_mean, &grid, &belief, &psi, Normalizer::ModeDensity)
                .unwrap();
        assert!((w.weights[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn zero_refinements_use_prior() {
        let m = linear_model();
        let grid = ParameterGrid::scalar(
            (-3.0, 3.0, 7, Prior::Normal { mean: 0.0, sd: 1.0 }),
            (-1.0, 1.0, 3, Prior::Uniform),
        )
        .unwrap();
        let data = vec![
            Observation::real(vec![1.0, 0.3], 0.5),
            Observation::real(vec![0.2, 1.0], -0.8),
        ];
        for normalizer in [
            Normalizer::ModeDensity,
            Normalizer::MatchedVariance,
            Normalizer::None,
        ] {
            let cfg = RelevanceConfig {
                refinement_iterations: 0,
                normalizer,
                ..RelevanceConfig::default()
            };
            let r = refine_relevance(&m, &data, &grid, &ProxyObservation::uninformative(), &cfg)
                .unwrap();
            for (p, w) in r.weights_per_psi.iter().enumerate() {
                let direct = prior_expected_relevance(
                    &m,
                    &data,
                    &grid,
                    grid.theta_prior_mass(),
                    &grid.psi_nodes()[p],
                    normalizer,
                )
                .unwrap();
                for (a, b) in w.weights.iter().zip(&direct.weights) {
                    assert!((a - b).abs() < 1e-15);
                }
            }
            assert_eq!(r.history.len(), 1);
        }
    }

    #[test]
    fn iteration_guard() {
        let cfg = RelevanceConfig {
            refinement_iterations: 11,
            ..RelevanceConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::Configuration(_))));
    }
}
