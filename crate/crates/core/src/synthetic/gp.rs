use rand::RngCore;
use rand_distr::{Distribution, Gamma};

use crate::diagnostics::TrueProcess;
use crate::error::{Error, Result};
use crate::grid::Prior;
use crate::model::{gp_model, Design, GpModel, Model, Observation, SharedParam, TaskParam};
use crate::rng::seeded_rng;

/// Learner prior on the shared lengthscale.
pub const GP_THETA_PRIOR: Prior = Prior::LogNormal {
    mu: 1.0,
    sigma: 1.0,
};
/// Learner prior on task lengthscales; also the generator of non-target tasks.
pub const GP_PSI_PRIOR: Prior = Prior::Gamma {
    shape: 3.0,
    scale: 0.8,
};

/// How task parameters of trajectories outside the target are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NonTargetTasks {
    /// One prior draw shared by every non-target trajectory.
    Shared,
    /// An independent prior draw per trajectory.
    Independent,
}

impl NonTargetTasks {
    pub fn label(&self) -> &'static str {
        match self {
            NonTargetTasks::Shared => "shared",
            NonTargetTasks::Independent => "independent",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GpScenario {
    pub n_trajectories: usize,
    pub m_target: usize,
    pub m_source: usize,
    pub resolution: usize,
    pub theta_star: f64,
    pub contamination_pct: f64,
    pub refinement_t: usize,
    pub non_target_tasks: NonTargetTasks,
}

impl Default for GpScenario {
    fn default() -> Self {
        Self {
            n_trajectories: 24,
            m_target: 20,
            m_source: 8,
            resolution: 10,
            theta_star: 1.0,
            contamination_pct: 0.0,
            refinement_t: 3,
            non_target_tasks: NonTargetTasks::Shared,
        }
    }
}

impl GpScenario {
    pub fn validate(&self) -> Result<()> {
        if self.m_source == 0 || self.m_source > self.n_trajectories {
            return Err(Error::Validation(format!(
                "m_source {} must lie in 1..={}",
                self.m_source, self.n_trajectories
            )));
        }
        if self.m_target > self.n_trajectories {
            return Err(Error::Validation(format!(
                "m_target {} exceeds {} trajectories",
                self.m_target, self.n_trajectories
            )));
        }
        if self.resolution < 2 {
            return Err(Error::Validation("GP resolution must be at least 2".into()));
        }
        super::linear::check_pct(self.contamination_pct, "contamination")
    }

    /// Evenly spaced inputs on `[0, 1]`.
    pub fn x_grid(&self) -> Vec<f64> {
        let step = 1.0 / (self.resolution - 1) as f64;
        (0..self.resolution).map(|i| i as f64 * step).collect()
    }
}

#[derive(Debug, Clone)]
pub struct GpInstance {
    pub model: GpModel,
    pub source: Vec<Observation>,
    pub prompts: Vec<Observation>,
    pub prompt_psi: Vec<TaskParam>,
    pub true_process: TrueProcess,
}

/// Gamma draw redrawn until it falls inside the model's support.
fn draw_lengthscale(model: &GpModel, rng: &mut dyn RngCore) -> f64 {
    let (lo, hi) = model.psi_support().bounds()[0];
    let Prior::Gamma { shape, scale } = GP_PSI_PRIOR else {
        unreachable!()
    };
    let gamma = Gamma::new(shape, scale).expect("valid gamma");
    loop {
        let v: f64 = gamma.sample(rng);
        if (lo..=hi).contains(&v) {
            break v;
        }
    }
}

/// Trajectories `1..=m_target` use `(θ*, ψ*_{n+1})` with `ψ*_{n+1}` drawn
/// from the task prior; the others use prior draws as set by
/// [`NonTargetTasks`]. The
/// first `m_source` trajectories are prompts, the last `m_source` are source
/// data.
pub fn gen_gp_trajectories_with(
    scenario: &GpScenario,
    rng: &mut dyn RngCore,
) -> Result<GpInstance> {
    scenario.validate()?;
    let model = gp_model(scenario.x_grid())?;
    let theta = SharedParam::new(vec![scenario.theta_star])?;
    let psi_target = TaskParam::scalar(draw_lengthscale(&model, rng));
    model.check_params(&theta, &psi_target)?;

    let n = scenario.n_trajectories;
    let shared = TaskParam::scalar(draw_lengthscale(&model, rng));
    let mut psi = Vec::with_capacity(n);
    let mut trajectories = Vec::with_capacity(n);
    for i in 0..n {
        let p = if i < scenario.m_target {
            psi_target.clone()
        } else if scenario.non_target_tasks == NonTargetTasks::Shared {
            shared.clone()
        } else {
            TaskParam::scalar(draw_lengthscale(&model, rng))
        };
        trajectories.push(model.simulate(&Design::default(), &theta, &p, rng)?);
        psi.push(p);
    }
    let m = scenario.m_source;
    let prompts = trajectories[..m].to_vec();
    let prompt_psi = psi[..m].to_vec();
    let source = trajectories[n - m..].to_vec();
    let true_process = TrueProcess::new(
        &model,
        theta,
        psi[n - m..].to_vec(),
        psi_target,
        vec![Design::default(); m],
    )?;
    Ok(GpInstance {
        model,
        source,
        prompts,
        prompt_psi,
        true_process,
    })
}

pub fn gen_gp_trajectories(scenario: &GpScenario, seed: u64) -> Result<GpInstance> {
    gen_gp_trajectories_with(scenario, &mut seeded_rng(seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_target_shares_psi() {
        let s = GpScenario {
            m_target: 24,
            ..GpScenario::default()
        };
        let inst = gen_gp_trajectories(&s, 3).unwrap();
        let tp = &inst.true_process;
        assert!(tp.psi_star.iter().all(|p| p == &tp.psi_target_star));
        assert!(inst.prompt_psi.iter().all(|p| p == &tp.psi_target_star));
        assert_eq!(inst.source.len(), 8);
        assert_eq!(inst.source[0].outcome.as_vector().unwrap().len(), 10);
    }

    #[test]
    fn grid_endpoints() {
        let g = GpScenario::default().x_grid();
        assert_eq!(g.first(), Some(&0.0));
        assert_eq!(g.last(), Some(&1.0));
        assert!(GpScenario {
            resolution: 1,
            ..GpScenario::default()
        }
        .validate()
        .is_err());
    }
}
