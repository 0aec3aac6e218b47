use super::information::{
    info_gain_classic, info_gain_rweighted, ProxyExpectation, ProxyModel, RelevanceSource,
};
use super::misspecification::{
    delta_classic, delta_rweighted_enumerated, pseudo_log_lik, rho_fidelity, DeltaVariant,
};
use super::TrueProcess;
use crate::error::{Error, Result};
use crate::grid::ParameterGrid;
use crate::inference::LikelihoodTable;
use crate::math::LogSumExp;
use crate::model::Model;
use crate::relevance::RelevanceProvider;

/// Both sides of the misspecification decomposition
/// `Δ^R = E[ESS·DIS] − n·ρ^R + D`, with `D = −H(P_{D*})`.
///
/// `residual_as_stated` uses the decomposition exactly as written.
/// `residual` divides the `E[ESS·DIS]` term by `n`, which is what the
/// algebra `Σᵢ wᵢℓᵢ = n·cov(w, ℓ) + (Σᵢ wᵢ)(Σᵢ ℓᵢ)/n` gives; the two agree
/// only for `n = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecompositionCheck {
    pub n: usize,
    pub delta_rweighted: f64,
    pub ess_dis_expectation: f64,
    pub rho: f64,
    pub constant_d: f64,
    pub residual_as_stated: f64,
    pub residual: f64,
}

/// Evaluates the decomposition by full enumeration of the dataset space,
/// with the unnormalized pseudo-replicated density.
pub fn check_decomposition(
    model: &dyn Model,
    tp: &TrueProcess,
    grid: &ParameterGrid,
    provider: &dyn RelevanceProvider,
) -> Result<DecompositionCheck> {
    let sets = tp.enumerate_datasets(model)?.ok_or_else(|| {
        Error::Configuration("decomposition check needs an enumerable dataset space".into())
    })?;
    let n = tp.n();
    let delta = delta_rweighted_enumerated(model, tp, grid, provider, DeltaVariant::Unnormalized)?;
    let constant_d: f64 = sets.iter().map(|(_, w)| w * w.ln()).sum();
    let rho = if n >= 2 {
        rho_fidelity(model, tp, grid, provider, 0, 0)?.value
    } else {
        0.0
    };
    let mut ess_dis = 0.0;
    for (p, (psi, m)) in grid
        .psi_nodes()
        .iter()
        .zip(grid.psi_prior_mass())
        .enumerate()
    {
        if *m == 0.0 {
            continue;
        }
        for (d, w) in &sets {
            let ll = pseudo_log_lik(model, d, &tp.theta_star, psi)?;
            let ess: f64 = provider.weights(d, p, psi)?.iter().sum();
            ess_dis += m * w * ess * -ll.iter().sum::<f64>();
        }
    }
    let nf = n as f64;
    Ok(DecompositionCheck {
        n,
        delta_rweighted: delta,
        ess_dis_expectation: ess_dis,
        rho,
        constant_d,
        residual_as_stated: delta - (ess_dis - nf * rho + constant_d),
        residual: delta - (ess_dis / nf - nf * rho + constant_d),
    })
}

/// Terms of the negative-transfer bound `IG^c ≤ A(B − Δ^c)` for a discrete
/// θ grid with the neighbourhood of `θ*` taken as `{θ*}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InformationBoundCheck {
    pub ig_classic: f64,
    /// Prior mass outside `{θ*}`.
    pub a: f64,
    /// Divergence from `P_{D*}` to the prior-weighted mixture over `θ ≠ θ*`.
    pub b: f64,
    pub delta_classic: f64,
    pub rhs: f64,
    pub satisfied: bool,
    /// `p(θ*) = 1`: the bound is trivial.
    pub degenerate: bool,
}

pub const BOUND_TOLERANCE: f64 = 1e-12;

pub fn check_information_bound(
    model: &dyn Model,
    tp: &TrueProcess,
    grid: &ParameterGrid,
    source_psi_prior: &[f64],
) -> Result<InformationBoundCheck> {
    let (k, dist) = grid.nearest_theta(tp.theta_star.values())?;
    if dist > 1e-12 {
        return Err(Error::Validation(
            "the bound check needs theta* on a grid node".into(),
        ));
    }
    let sets = tp.enumerate_datasets(model)?.ok_or_else(|| {
        Error::Configuration("bound check needs an enumerable dataset space".into())
    })?;
    let ig = info_gain_classic(model, tp, grid, source_psi_prior, 0, 0)?.value;
    let dc = delta_classic(model, tp, grid, source_psi_prior)?;
    let prior = grid.theta_prior_mass();
    let a = 1.0 - prior[k];
    if a <= 0.0 {
        return Ok(InformationBoundCheck {
            ig_classic: ig,
            a: 0.0,
            b: f64::NAN,
            delta_classic: dc,
            rhs: 0.0,
            satisfied: ig <= BOUND_TOLERANCE,
            degenerate: true,
        });
    }
    let log_src: Vec<f64> = source_psi_prior.iter().map(|m| m.ln()).collect();
    let mut b = 0.0;
    for (d, w) in &sets {
        let table = LikelihoodTable::build(model, d, grid)?;
        let mut rest = LogSumExp::new();
        for (t, pt) in prior.iter().enumerate() {
            if t == k || *pt == 0.0 {
                continue;
            }
            let mut ll = (pt / a).ln();
            for i in 0..d.len() {
                let mut mix = LogSumExp::new();
                for (p, ls) in log_src.iter().enumerate() {
                    mix.add(ls + table.get(t, p, i));
                }
                ll += mix.value();
            }
            rest.add(ll);
        }
        b += w * (w.ln() - rest.value());
    }
    let rhs = a * (b - dc);
    Ok(InformationBoundCheck {
        ig_classic: ig,
        a,
        b,
        delta_classic: dc,
        rhs,
        satisfied: ig <= rhs + BOUND_TOLERANCE,
        degenerate: false,
    })
}

/// Every diagnostic for one enumerable instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsReport {
    pub ig_classic: f64,
    pub ig_rweighted: f64,
    pub delta_classic: f64,
    /// Unnormalized pseudo-replicated density.
    pub delta_rweighted: f64,
    pub delta_rweighted_normalized: f64,
    pub rho_fidelity: f64,
    pub ess_dis_expectation: f64,
    pub entropy_true: f64,
    pub decomposition_residual: f64,
    pub decomposition_residual_as_stated: f64,
    pub bound_classic: InformationBoundCheck,
}

pub fn diagnose_discrete(
    model: &dyn Model,
    tp: &TrueProcess,
    grid: &ParameterGrid,
    source_psi_prior: &[f64],
    provider: &dyn RelevanceProvider,
    proxy_model: &dyn ProxyModel,
    expectation: ProxyExpectation,
) -> Result<DiagnosticsReport> {
    let prop = check_decomposition(model, tp, grid, provider)?;
    let bound = check_information_bound(model, tp, grid, source_psi_prior)?;
    let ig_r = info_gain_rweighted(
        model,
        tp,
        grid,
        &RelevanceSource::Provider(provider),
        proxy_model,
        expectation,
        0,
        0,
    )?;
    Ok(DiagnosticsReport {
        ig_classic: bound.ig_classic,
        ig_rweighted: ig_r.value,
        delta_classic: bound.delta_classic,
        delta_rweighted: prop.delta_rweighted,
        delta_rweighted_normalized: delta_rweighted_enumerated(
            model,
            tp,
            grid,
            provider,
            DeltaVariant::Normalized,
        )?,
        rho_fidelity: prop.rho,
        ess_dis_expectation: prop.ess_dis_expectation,
        entropy_true: -prop.constant_d,
        decomposition_residual: prop.residual,
        decomposition_residual_as_stated: prop.residual_as_stated,
        bound_classic: bound,
    })
}
