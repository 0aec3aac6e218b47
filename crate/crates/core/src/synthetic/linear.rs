use rand::{Rng, RngCore};
use rand_distr::{Distribution, Normal};

use crate::diagnostics::TrueProcess;
use crate::error::{Error, Result};
use crate::model::{linear_model, Design, Model, Observation, SharedParam, TaskParam};
use crate::rng::seeded_rng;

/// Standard deviation of every normal draw in the covariate generator.
pub const COVARIATE_SD: f64 = 0.25;
const DIVISION_GUARD: f64 = 1e-6;
/// `θ*` in every linear simulation.
pub const LINEAR_THETA_STAR: f64 = -1.0;
/// Value given to source tasks that do not resemble the target: the mean of
/// the learner's `N(0, 1)` task-parameter prior.
pub const NON_RESEMBLING_PSI: f64 = 0.0;

/// One covariate row `(x₁, x₂)` per entry. A latent `x' ~ N(ρ, sd)` drives
/// `x₁ ~ N(x', sd)` and `x₂ ~ N(−ρ²/x', sd)`, so larger `ρ` makes the
/// columns strongly anti-aligned.
pub fn gen_linear_covariates_with(
    rho_c: f64,
    count: usize,
    rng: &mut dyn RngCore,
) -> Vec<Vec<f64>> {
    let latent = Normal::new(rho_c, COVARIATE_SD).expect("valid sd");
    (0..count)
        .map(|_| {
            let x_prime = loop {
                let v: f64 = latent.sample(rng);
                if v.abs() >= DIVISION_GUARD {
                    break v;
                }
            };
            let x1 = Normal::new(x_prime, COVARIATE_SD)
                .expect("valid sd")
                .sample(rng);
            let x2 = Normal::new(-rho_c * rho_c / x_prime, COVARIATE_SD)
                .expect("valid sd")
                .sample(rng);
            vec![x1, x2]
        })
        .collect()
}

pub fn gen_linear_covariates(rho_c: f64, count: usize, seed: u64) -> Vec<Vec<f64>> {
    gen_linear_covariates_with(rho_c, count, &mut seeded_rng(seed))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearScenario {
    pub multicollinearity: f64,
    pub n_outcome: usize,
    pub n_proxy_prompts: usize,
    pub target_resemblance_pct: f64,
    pub contamination_pct: f64,
}

impl Default for LinearScenario {
    fn default() -> Self {
        Self {
            multicollinearity: 2.0,
            n_outcome: 75,
            n_proxy_prompts: 25,
            target_resemblance_pct: 100.0,
            contamination_pct: 0.0,
        }
    }
}

pub(crate) fn check_pct(value: f64, what: &str) -> Result<()> {
    if !(0.0..=100.0).contains(&value) {
        return Err(Error::Validation(format!(
            "{what} {value} must lie in [0, 100]"
        )));
    }
    Ok(())
}

impl LinearScenario {
    pub fn validate(&self) -> Result<()> {
        if self.n_outcome == 0 || self.n_proxy_prompts == 0 {
            return Err(Error::Validation(
                "linear scenario counts must be positive".into(),
            ));
        }
        if !self.multicollinearity.is_finite() {
            return Err(Error::Validation("multicollinearity must be finite".into()));
        }
        check_pct(self.target_resemblance_pct, "target resemblance")?;
        check_pct(self.contamination_pct, "contamination")
    }
}

/// Source data, expert prompts and the generating process of one linear
/// simulation.
#[derive(Debug, Clone)]
pub struct LinearInstance {
    pub source: Vec<Observation>,
    pub prompts: Vec<Observation>,
    pub prompt_psi: Vec<TaskParam>,
    pub true_process: TrueProcess,
}

/// Number of the first `count` tasks that share the target's parameter.
pub(crate) fn resembling_count(pct: f64, count: usize) -> usize {
    ((pct / 100.0) * count as f64).round() as usize
}

fn task_params(pct: f64, count: usize, target: f64) -> Vec<TaskParam> {
    let k = resembling_count(pct, count);
    (0..count)
        .map(|i| TaskParam::scalar(if i < k { target } else { NON_RESEMBLING_PSI }))
        .collect()
}

/// Draws `ψ*_{n+1} ~ N(0, 1)` (redrawn outside the model support) and then
/// prompts followed by source rows from one covariate stream. The first
/// `target_resemblance_pct` percent of source rows, and of prompts, share
/// `ψ*_{n+1}`; the rest use [`NON_RESEMBLING_PSI`].
pub fn gen_linear_scenario(
    scenario: &LinearScenario,
    rng: &mut dyn RngCore,
) -> Result<LinearInstance> {
    scenario.validate()?;
    let model = linear_model();
    let (lo, hi) = model.psi_support().bounds()[0];
    let psi_target = loop {
        let v: f64 = rng.sample(rand_distr::StandardNormal);
        if v >= lo && v <= hi {
            break v;
        }
    };
    let theta = SharedParam::scalar(LINEAR_THETA_STAR);
    let rows = gen_linear_covariates_with(
        scenario.multicollinearity,
        scenario.n_proxy_prompts + scenario.n_outcome,
        rng,
    );
    let (prompt_rows, source_rows) = rows.split_at(scenario.n_proxy_prompts);

    let prompt_psi = task_params(
        scenario.target_resemblance_pct,
        scenario.n_proxy_prompts,
        psi_target,
    );
    let prompts = prompt_rows
        .iter()
        .zip(&prompt_psi)
        .map(|(x, psi)| model.simulate(&Design::new(x.clone()), &theta, psi, rng))
        .collect::<Result<Vec<_>>>()?;

    let psi_star = task_params(
        scenario.target_resemblance_pct,
        scenario.n_outcome,
        psi_target,
    );
    let designs: Vec<Design> = source_rows.iter().map(|x| Design::new(x.clone())).collect();
    let true_process = TrueProcess::new(
        &model,
        theta,
        psi_star,
        TaskParam::scalar(psi_target),
        designs,
    )?;
    let source = true_process.simulate(&model, rng)?;
    Ok(LinearInstance {
        source,
        prompts,
        prompt_psi,
        true_process,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resemblance_allocation() {
        assert_eq!(resembling_count(100.0, 75), 75);
        assert_eq!(resembling_count(50.0, 75), 38);
        assert_eq!(resembling_count(0.0, 25), 0);
    }

    #[test]
    fn scenario_validation() {
        let bad = LinearScenario {
            contamination_pct: 120.0,
            ..LinearScenario::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn full_resemblance_shares_target() {
        let inst = gen_linear_scenario(&LinearScenario::default(), &mut seeded_rng(5)).unwrap();
        let tp = &inst.true_process;
        assert_eq!(inst.source.len(), 75);
        assert_eq!(inst.prompts.len(), 25);
        assert!(tp.psi_star.iter().all(|p| p == &tp.psi_target_star));
        assert!(inst.prompt_psi.iter().all(|p| p == &tp.psi_target_star));
    }
}
