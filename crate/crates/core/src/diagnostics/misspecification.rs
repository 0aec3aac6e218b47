use rand::RngCore;
use rayon::prelude::*;

use super::{Estimate, TrueProcess, MAX_ENUMERATED_DATASETS};
use crate::error::{Error, Result};
use crate::grid::ParameterGrid;
use crate::math::{log_sum_exp, tempered, LogSumExp};
use crate::model::{Design, Model, Observation, SharedParam, TaskParam};
use crate::relevance::{RelevanceProvider, RelevanceWeights};
use crate::rng::task_rng;

/// Whether the pseudo-replicated density is used as is or renormalized over
/// the outcome space before taking the divergence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeltaVariant {
    Unnormalized,
    Normalized,
}

impl DeltaVariant {
    pub fn label(&self) -> &'static str {
        match self {
            DeltaVariant::Unnormalized => "unnormalized",
            DeltaVariant::Normalized => "normalized",
        }
    }
}

fn quadrature(
    model: &dyn Model,
    design: &Design,
    theta: &SharedParam,
    psi: &TaskParam,
) -> Result<Vec<(Observation, f64)>> {
    model
        .outcome_quadrature(design, theta, psi)?
        .ok_or_else(|| {
            Error::Configuration(format!(
                "model '{}' has no outcome quadrature",
                model.name()
            ))
        })
}

/// `KL(P_{D*} ‖ P_{D|θ*})`, where the second distribution marginalizes each
/// observation's task parameter over `source_psi_prior` on the grid's ψ
/// nodes. Both are products over observations, so the divergence is a sum
/// of per-observation terms.
pub fn delta_classic(
    model: &dyn Model,
    tp: &TrueProcess,
    grid: &ParameterGrid,
    source_psi_prior: &[f64],
) -> Result<f64> {
    if source_psi_prior.len() != grid.psi_len() {
        return Err(Error::Validation(
            "source psi prior does not match the grid".into(),
        ));
    }
    let log_src: Vec<f64> = source_psi_prior.iter().map(|m| m.ln()).collect();
    let mut total = 0.0;
    for (design, psi_true) in tp.designs.iter().zip(&tp.psi_star) {
        for (obs, w) in quadrature(model, design, &tp.theta_star, psi_true)? {
            if w <= 0.0 {
                continue;
            }
            let truth = model.log_likelihood(&obs, &tp.theta_star, psi_true)?;
            let mut mix = LogSumExp::new();
            for (psi, ls) in grid.psi_nodes().iter().zip(&log_src) {
                if *ls > f64::NEG_INFINITY {
                    mix.add(ls + model.log_likelihood(&obs, &tp.theta_star, psi)?);
                }
            }
            let mix = mix.value();
            if mix == f64::NEG_INFINITY {
                return Ok(f64::INFINITY);
            }
            total += w * (truth - mix);
        }
    }
    Ok(total.max(0.0))
}

/// Expected divergence, over the grid's ψ prior, from `P_{D*}` to the
/// pseudo-replicated density `Πᵢ p(dᵢ | θ*, ψᵢ = ψ)^{wᵢ(ψ)}` with weights
/// fixed per ψ node. The normalized variant needs an enumerable outcome
/// space.
pub fn delta_rweighted(
    model: &dyn Model,
    tp: &TrueProcess,
    grid: &ParameterGrid,
    weights_per_psi: &[RelevanceWeights],
    variant: DeltaVariant,
) -> Result<f64> {
    if weights_per_psi.len() != grid.psi_len() {
        return Err(Error::Validation(
            "need one weight vector per psi node".into(),
        ));
    }
    if variant == DeltaVariant::Normalized && !model.is_enumerable() {
        return Err(Error::Configuration(
            "normalized pseudo-replicated density needs an enumerable outcome space".into(),
        ));
    }
    let mut total = 0.0;
    for ((psi, m), w) in grid
        .psi_nodes()
        .iter()
        .zip(grid.psi_prior_mass())
        .zip(weights_per_psi)
    {
        if *m == 0.0 {
            continue;
        }
        if w.weights.len() != tp.n() {
            return Err(Error::Validation(
                "weight vector length differs from n".into(),
            ));
        }
        let mut kl = 0.0;
        for (i, (design, psi_true)) in tp.designs.iter().zip(&tp.psi_star).enumerate() {
            let wi = w.weights[i];
            for (obs, q) in quadrature(model, design, &tp.theta_star, psi_true)? {
                if q <= 0.0 {
                    continue;
                }
                let truth = model.log_likelihood(&obs, &tp.theta_star, psi_true)?;
                let pseudo = tempered(wi, model.log_likelihood(&obs, &tp.theta_star, psi)?);
                kl += q * (truth - pseudo);
            }
            if variant == DeltaVariant::Normalized {
                let logs: Vec<f64> = quadrature(model, design, &tp.theta_star, psi)?
                    .iter()
                    .map(|(obs, _)| {
                        Ok(tempered(
                            wi,
                            model.log_likelihood(obs, &tp.theta_star, psi)?,
                        ))
                    })
                    .collect::<Result<_>>()?;
                kl += log_sum_exp(&logs);
            }
        }
        total += m * kl;
    }
    Ok(total)
}

/// Every dataset in the outcome space of the designs, regardless of its
/// probability. Outcomes are listed by the quadrature at `(θ, ψ)`.
pub(crate) fn outcome_space(
    model: &dyn Model,
    designs: &[Design],
    theta: &SharedParam,
    psi: &TaskParam,
) -> Result<Vec<Vec<Observation>>> {
    if !model.is_enumerable() {
        return Err(Error::Configuration(format!(
            "model '{}' is not enumerable",
            model.name()
        )));
    }
    let mut sets: Vec<Vec<Observation>> = vec![Vec::new()];
    for design in designs {
        let outcomes = quadrature(model, design, theta, psi)?;
        if sets.len().saturating_mul(outcomes.len()) > MAX_ENUMERATED_DATASETS {
            return Err(Error::Configuration(
                "outcome space too large to enumerate".into(),
            ));
        }
        let mut next = Vec::with_capacity(sets.len() * outcomes.len());
        for d in &sets {
            for (obs, _) in &outcomes {
                let mut e = d.clone();
                e.push(obs.clone());
                next.push(e);
            }
        }
        sets = next;
    }
    Ok(sets)
}

/// Pseudo-intervened log-likelihoods `log p(dᵢ | θ*, ψᵢ = ψ)`.
pub(crate) fn pseudo_log_lik(
    model: &dyn Model,
    data: &[Observation],
    theta: &SharedParam,
    psi: &TaskParam,
) -> Result<Vec<f64>> {
    model.log_likelihood_batch(data, theta, psi)
}

pub(crate) fn tempered_sum(weights: &[f64], ll: &[f64]) -> f64 {
    weights.iter().zip(ll).map(|(w, l)| tempered(*w, *l)).sum()
}

/// [`delta_rweighted`] with data-dependent weights, by full enumeration of
/// the dataset space.
pub fn delta_rweighted_enumerated(
    model: &dyn Model,
    tp: &TrueProcess,
    grid: &ParameterGrid,
    provider: &dyn RelevanceProvider,
    variant: DeltaVariant,
) -> Result<f64> {
    let sets = tp
        .enumerate_datasets(model)?
        .ok_or_else(|| Error::Configuration("dataset space is not enumerable".into()))?;
    let neg_entropy: f64 = sets.iter().map(|(_, w)| w * w.ln()).sum();
    let mut total = 0.0;
    for (p, (psi, m)) in grid
        .psi_nodes()
        .iter()
        .zip(grid.psi_prior_mass())
        .enumerate()
    {
        if *m == 0.0 {
            continue;
        }
        let mut cross = 0.0;
        for (d, w) in &sets {
            let ll = pseudo_log_lik(model, d, &tp.theta_star, psi)?;
            cross += w * tempered_sum(&provider.weights(d, p, psi)?, &ll);
        }
        let mut kl = neg_entropy - cross;
        if variant == DeltaVariant::Normalized {
            let logs: Vec<f64> = outcome_space(model, &tp.designs, &tp.theta_star, psi)?
                .iter()
                .map(|d| {
                    let ll = pseudo_log_lik(model, d, &tp.theta_star, psi)?;
                    Ok(tempered_sum(&provider.weights(d, p, psi)?, &ll))
                })
                .collect::<Result<_>>()?;
            kl += log_sum_exp(&logs);
        }
        total += m * kl;
    }
    Ok(total)
}

/// Covariance, over observations, of weights and pseudo-intervened
/// log-likelihoods. Exactly zero for constant weights.
pub(crate) fn weight_loglik_covariance(weights: &[f64], ll: &[f64]) -> f64 {
    let n = weights.len() as f64;
    if weights.iter().all(|w| *w == weights[0]) {
        return 0.0;
    }
    let wbar = weights.iter().sum::<f64>() / n;
    let lbar = ll.iter().sum::<f64>() / n;
    weights
        .iter()
        .zip(ll)
        .map(|(w, l)| (w - wbar) * (l - lbar))
        .sum::<f64>()
        / n
}

/// Fidelity: expected covariance between relevance weights and
/// pseudo-intervened log-likelihoods, over datasets from `P_{D*}` and target
/// ψ from the grid prior. Exact for enumerable models.
pub fn rho_fidelity(
    model: &dyn Model,
    tp: &TrueProcess,
    grid: &ParameterGrid,
    provider: &dyn RelevanceProvider,
    n_outer: usize,
    seed: u64,
) -> Result<Estimate> {
    if tp.n() < 2 {
        return Err(Error::Validation(
            "fidelity needs at least two observations".into(),
        ));
    }
    let per_dataset = |d: &[Observation]| -> Result<f64> {
        let mut acc = 0.0;
        for (p, (psi, m)) in grid
            .psi_nodes()
            .iter()
            .zip(grid.psi_prior_mass())
            .enumerate()
        {
            if *m == 0.0 {
                continue;
            }
            let ll = pseudo_log_lik(model, d, &tp.theta_star, psi)?;
            acc += m * weight_loglik_covariance(&provider.weights(d, p, psi)?, &ll);
        }
        Ok(acc)
    };
    if let Some(sets) = tp.enumerate_datasets(model)? {
        let mut total = 0.0;
        for (d, w) in &sets {
            total += w * per_dataset(d)?;
        }
        return Ok(Estimate::exact(total));
    }
    if n_outer == 0 {
        return Err(Error::Validation(
            "Monte Carlo needs at least one outer sample".into(),
        ));
    }
    let values: Vec<f64> = (0..n_outer as u64)
        .into_par_iter()
        .map(|s| {
            let mut rng = task_rng(seed, s);
            per_dataset(&tp.simulate(model, &mut rng as &mut dyn RngCore)?)
        })
        .collect::<Result<_>>()?;
    Ok(Estimate::from_samples(&values))
}

/// Effective sample size `Σ wᵢ` and dissimilarity `−log p(d | θ*, ψ)` of one
/// dataset under one candidate target.
pub fn ess_dis(
    model: &dyn Model,
    data: &[Observation],
    theta_star: &SharedParam,
    psi_target: &TaskParam,
    weights: &[f64],
) -> Result<(f64, f64)> {
    if weights.len() != data.len() {
        return Err(Error::Validation(
            "weights and data differ in length".into(),
        ));
    }
    let ll = pseudo_log_lik(model, data, theta_star, psi_target)?;
    Ok((weights.iter().sum(), -ll.iter().sum::<f64>()))
}
