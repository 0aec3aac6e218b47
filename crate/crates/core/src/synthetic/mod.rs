//! Seeded generators for the linear, GP, discrete-toy and proxy experiments.
//!
//! Each generator has a `_with` form taking a generator and a form taking a
//! `u64` seed; outputs are pure functions of their inputs.

mod gp;
mod linear;
mod proxy;
mod toy;

pub use gp::{
    gen_gp_trajectories, gen_gp_trajectories_with, GpInstance, GpScenario, NonTargetTasks,
    GP_PSI_PRIOR, GP_THETA_PRIOR,
};
pub use linear::{
    gen_linear_covariates, gen_linear_covariates_with, gen_linear_scenario, LinearInstance,
    LinearScenario, COVARIATE_SD, LINEAR_THETA_STAR, NON_RESEMBLING_PSI,
};
pub use proxy::{
    draw_expert_ratings, gen_expert_proxy, gen_imprecise_estimate_proxy,
    gen_imprecise_estimate_proxy_with, imprecise_estimate_observation, ExpertProxyModel,
    ImpreciseProxy, BIAS_SD, RATING_SCALE,
};
pub use toy::{gen_toy_instance, TableProxyModel, TableRelevance, ToyInstance, ToySpec};
