use std::sync::Arc;

use rand::seq::index::sample;
use rand::RngCore;
use rand_distr::{Binomial, Distribution, Normal};

use crate::diagnostics::ProxyModel;
use crate::error::{Error, Result};
use crate::grid::ParameterGrid;
use crate::inference::{ProxyObservation, ProxyPayload};
use crate::math::{binomial_log_pmf, normal_log_pdf, LogSumExp};
use crate::model::{Model, Observation, SharedParam, TaskParam};
use crate::relevance::Normalizer;
use crate::rng::seeded_rng;

/// Top of the expert rating scale.
pub const RATING_SCALE: u64 = 7;
/// Standard deviation of the bias added to misleading imprecise estimates.
pub const BIAS_SD: f64 = 3.0;

/// Ratings `z ~ Binomial(7, p̃)` for each prompt, except that exactly
/// `round(q·N)` prompts, chosen at random, use `1 − p̃`. Returns ratings and
/// contamination flags.
pub fn draw_expert_ratings(
    p_tilde: &[f64],
    contamination_pct: f64,
    rng: &mut dyn RngCore,
) -> Result<(Vec<u64>, Vec<bool>)> {
    super::linear::check_pct(contamination_pct, "contamination")?;
    let n = p_tilde.len();
    let k = super::linear::resembling_count(contamination_pct, n);
    let mut contaminated = vec![false; n];
    for i in sample(rng, n, k) {
        contaminated[i] = true;
    }
    let ratings = p_tilde
        .iter()
        .zip(&contaminated)
        .map(|(p, c)| {
            let p = if *c { 1.0 - p } else { *p };
            let dist = Binomial::new(RATING_SCALE, p.clamp(0.0, 1.0))
                .map_err(|e| Error::Numerical(e.to_string()))?;
            Ok(dist.sample(rng))
        })
        .collect::<Result<_>>()?;
    Ok((ratings, contaminated))
}

struct ExpertInner {
    model: Arc<dyn Model>,
    prompts: Vec<Observation>,
    theta_nodes: Vec<SharedParam>,
    theta_mass: Vec<f64>,
    log_theta_mass: Vec<f64>,
    normalizer: Normalizer,
}

impl ExpertInner {
    fn log_p_tilde(&self, prompt: usize, psi: &TaskParam) -> f64 {
        let obs = &self.prompts[prompt];
        let design = obs.design();
        let mut num = LogSumExp::new();
        let mut den = LogSumExp::new();
        for (theta, lm) in self.theta_nodes.iter().zip(&self.log_theta_mass) {
            if *lm == f64::NEG_INFINITY {
                continue;
            }
            let Ok(ll) = self.model.log_likelihood(obs, theta, psi) else {
                return f64::NEG_INFINITY;
            };
            num.add(lm + ll);
            if self.normalizer == Normalizer::ModeDensity {
                let Ok(mode) = self.model.log_mode_density(&design, theta, psi) else {
                    return f64::NEG_INFINITY;
                };
                den.add(lm + mode);
            }
        }
        let log_norm = match self.normalizer {
            Normalizer::ModeDensity => den.value(),
            Normalizer::MatchedVariance => {
                match self.model.log_matched_mode_density(
                    &design,
                    &self.theta_nodes,
                    &self.theta_mass,
                    psi,
                ) {
                    Ok(v) => v,
                    Err(_) => return f64::NEG_INFINITY,
                }
            }
            Normalizer::None => 0.0,
        };
        (num.value() - log_norm).min(0.0)
    }
}

/// Synthetic expert rating how representative each prompt is of a target
/// task. The rating probability `p̃` of a prompt is its θ-prior-averaged
/// likelihood under the candidate target ψ, divided by the same normalizer
/// as the relevance weights and clipped at 1. The learner's likelihood
/// always assumes no contamination.
#[derive(Clone)]
pub struct ExpertProxyModel {
    inner: Arc<ExpertInner>,
    contamination_pct: f64,
}

impl ExpertProxyModel {
    pub fn new(
        model: Arc<dyn Model>,
        prompts: Vec<Observation>,
        theta_grid: &ParameterGrid,
        contamination_pct: f64,
        normalizer: Normalizer,
    ) -> Result<Self> {
        if prompts.is_empty() {
            return Err(Error::Validation(
                "expert proxy needs at least one prompt".into(),
            ));
        }
        super::linear::check_pct(contamination_pct, "contamination")?;
        let theta_mass = theta_grid.theta_prior_mass().to_vec();
        Ok(Self {
            inner: Arc::new(ExpertInner {
                model,
                prompts,
                theta_nodes: theta_grid.theta_nodes().to_vec(),
                log_theta_mass: theta_mass.iter().map(|m| m.ln()).collect(),
                theta_mass,
                normalizer,
            }),
            contamination_pct,
        })
    }

    pub fn prompt_count(&self) -> usize {
        self.inner.prompts.len()
    }

    pub fn p_tilde(&self, prompt: usize, psi: &TaskParam) -> f64 {
        self.inner.log_p_tilde(prompt, psi).exp()
    }

    /// Learner-side proxy observations for given ratings.
    pub fn observations(&self, ratings: &[u64]) -> Vec<ProxyObservation> {
        ratings
            .iter()
            .enumerate()
            .map(|(j, z)| {
                let inner = Arc::clone(&self.inner);
                ProxyObservation::new(ProxyPayload::Count(*z), move |payload, psi| {
                    let ProxyPayload::Count(z) = payload else {
                        return f64::NEG_INFINITY;
                    };
                    let log_p = inner.log_p_tilde(j, psi);
                    binomial_log_pmf(*z, RATING_SCALE, log_p, (-log_p.exp()).ln_1p())
                })
            })
            .collect()
    }

    /// Ratings drawn with `ψ` as the target, with contamination applied.
    pub fn draw_ratings(
        &self,
        psi: &TaskParam,
        rng: &mut dyn RngCore,
    ) -> Result<(Vec<u64>, Vec<bool>)> {
        let p: Vec<f64> = (0..self.prompt_count())
            .map(|j| self.p_tilde(j, psi))
            .collect();
        draw_expert_ratings(&p, self.contamination_pct, rng)
    }
}

impl ProxyModel for ExpertProxyModel {
    fn sample(&self, psi: &TaskParam, rng: &mut dyn RngCore) -> Result<Vec<ProxyObservation>> {
        Ok(self.observations(&self.draw_ratings(psi, rng)?.0))
    }
}

/// Expert proxy for `prompts` rated against `ψ*_{n+1}`.
pub fn gen_expert_proxy(
    model: Arc<dyn Model>,
    prompts: Vec<Observation>,
    theta_grid: &ParameterGrid,
    psi_target_star: &TaskParam,
    contamination_pct: f64,
    normalizer: Normalizer,
    seed: u64,
) -> Result<Vec<ProxyObservation>> {
    let expert = ExpertProxyModel::new(model, prompts, theta_grid, contamination_pct, normalizer)?;
    expert.sample(psi_target_star, &mut seeded_rng(seed))
}

/// Learner-side model of a noisy estimate of ψ: `z ~ N(ψ, σ)`.
pub fn imprecise_estimate_observation(z: f64, sigma: f64) -> ProxyObservation {
    ProxyObservation::new(
        ProxyPayload::Real(vec![z]),
        move |payload, psi| match payload {
            ProxyPayload::Real(v) => normal_log_pdf(v[0], psi[0], sigma),
            _ => f64::NEG_INFINITY,
        },
    )
}

/// A draw of the imprecise-estimate proxy.
#[derive(Debug, Clone)]
pub struct ImpreciseProxy {
    pub observation: ProxyObservation,
    pub z: f64,
    /// The bias drawn once when contamination is on, else zero.
    pub bias: f64,
}

/// `z = N(ψ*, σ) + 1[bias]·ε` with `ε ~ N(0, 3)`, modelled by the learner as
/// an unbiased `N(ψ, σ)` estimate.
pub fn gen_imprecise_estimate_proxy_with(
    psi_target_star: f64,
    sigma: f64,
    bias_flag: bool,
    rng: &mut dyn RngCore,
) -> Result<ImpreciseProxy> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Validation(format!(
            "proxy sigma {sigma} must be positive"
        )));
    }
    let z = Normal::new(psi_target_star, sigma)
        .map_err(|e| Error::Numerical(e.to_string()))?
        .sample(rng);
    let bias = if bias_flag {
        Normal::new(0.0, BIAS_SD).expect("valid sd").sample(rng)
    } else {
        0.0
    };
    Ok(ImpreciseProxy {
        observation: imprecise_estimate_observation(z + bias, sigma),
        z: z + bias,
        bias,
    })
}

pub fn gen_imprecise_estimate_proxy(
    psi_target_star: f64,
    sigma: f64,
    bias_flag: bool,
    seed: u64,
) -> Result<ImpreciseProxy> {
    gen_imprecise_estimate_proxy_with(psi_target_star, sigma, bias_flag, &mut seeded_rng(seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::normal_log_mode_density;

    #[test]
    fn certain_ratings() {
        let mut rng = seeded_rng(1);
        let (z, _) = draw_expert_ratings(&[1.0; 50], 0.0, &mut rng).unwrap();
        assert!(z.iter().all(|v| *v == 7));
        let (z, c) = draw_expert_ratings(&[1.0; 50], 100.0, &mut rng).unwrap();
        assert!(z.iter().all(|v| *v == 0));
        assert!(c.iter().all(|v| *v));
    }

    #[test]
    fn exact_contaminated_count() {
        let (_, c) = draw_expert_ratings(&[0.3; 10_000], 25.0, &mut seeded_rng(2)).unwrap();
        assert_eq!(c.iter().filter(|v| **v).count(), 2500);
    }

    #[test]
    fn learner_density_at_estimate() {
        let obs = imprecise_estimate_observation(0.7, 3.0);
        let v = obs.log_likelihood(&TaskParam::scalar(0.7));
        assert!((v - normal_log_mode_density(3.0)).abs() < 1e-15);
        assert!(gen_imprecise_estimate_proxy(0.0, 0.0, false, 1).is_err());
    }
}
