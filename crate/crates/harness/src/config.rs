//! TOML experiment configuration.
//!
//! Every key is optional except `experiment`; unknown keys are errors.
//! List-valued scenario keys are swept as a Cartesian product, one group per
//! combination.
//!
//! ```toml
//! experiment = "linear"        # linear | gp | smoking | toy-verify
//! n_simulations = 50
//! master_seed = 1
//! grid_resolution = 101        # nodes per scalar parameter
//! output_dir = "out/linear"
//! parallelism = 0              # worker threads; 0 uses every core
//!
//! [relevance]
//! normalizer = "matched-variance"   # matched-variance | mode-density | none
//! refinement_iterations = 3
//!
//! [linear]
//! multicollinearity = [0.0, 1.0, 2.0]
//! target_resemblance_pct = [100.0]
//! contamination_pct = [0.0]
//! n_outcome = 75
//! n_proxy_prompts = 25
//! ```

use std::path::{Path, PathBuf};

use prompt_core::relevance::{
    Normalizer, RelevanceConfig, RelevanceKind, MAX_REFINEMENT_ITERATIONS,
};
use prompt_core::synthetic::{GpScenario, LinearScenario, NonTargetTasks, ToySpec};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Linear,
    Gp,
    Smoking,
    ToyVerify,
}

impl ExperimentKind {
    pub fn label(&self) -> &'static str {
        match self {
            ExperimentKind::Linear => "linear",
            ExperimentKind::Gp => "gp",
            ExperimentKind::Smoking => "smoking",
            ExperimentKind::ToyVerify => "toy-verify",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormalizerSetting {
    MatchedVariance,
    ModeDensity,
    None,
}

impl From<NormalizerSetting> for Normalizer {
    fn from(n: NormalizerSetting) -> Self {
        match n {
            NormalizerSetting::MatchedVariance => Normalizer::MatchedVariance,
            NormalizerSetting::ModeDensity => Normalizer::ModeDensity,
            NormalizerSetting::None => Normalizer::None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProxyMode {
    Weak,
    Strong,
    Misleading,
}

impl ProxyMode {
    pub const ALL: [ProxyMode; 3] = [ProxyMode::Weak, ProxyMode::Strong, ProxyMode::Misleading];

    pub fn label(&self) -> &'static str {
        match self {
            ProxyMode::Weak => "weak",
            ProxyMode::Strong => "strong",
            ProxyMode::Misleading => "misleading",
        }
    }

    /// Proxy standard deviation and whether a bias is added.
    pub fn settings(&self) -> (f64, bool) {
        match self {
            ProxyMode::Weak => (3.0, false),
            ProxyMode::Strong => (0.1, false),
            ProxyMode::Misleading => (3.0, true),
        }
    }
}

impl std::str::FromStr for ProxyMode {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "weak" => Ok(ProxyMode::Weak),
            "strong" => Ok(ProxyMode::Strong),
            "misleading" => Ok(ProxyMode::Misleading),
            other => Err(HarnessError::Config(format!(
                "unknown proxy mode '{other}' (expected weak, strong or misleading)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RelevanceSettings {
    pub normalizer: NormalizerSetting,
    pub refinement_iterations: usize,
}

impl Default for RelevanceSettings {
    fn default() -> Self {
        Self {
            normalizer: NormalizerSetting::MatchedVariance,
            refinement_iterations: 3,
        }
    }
}

impl RelevanceSettings {
    pub fn config(&self, iterations: usize) -> RelevanceConfig {
        RelevanceConfig {
            kind: RelevanceKind::PriorExpected,
            refinement_iterations: iterations,
            normalizer: self.normalizer.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinearSweep {
    pub multicollinearity: Vec<f64>,
    pub target_resemblance_pct: Vec<f64>,
    pub contamination_pct: Vec<f64>,
    pub n_outcome: usize,
    pub n_proxy_prompts: usize,
}

impl Default for LinearSweep {
    fn default() -> Self {
        Self {
            multicollinearity: vec![0.0, 1.0, 2.0],
            target_resemblance_pct: vec![100.0],
            contamination_pct: vec![0.0],
            n_outcome: 75,
            n_proxy_prompts: 25,
        }
    }
}

impl LinearSweep {
    /// One scenario per sweep cell, multicollinearity varying slowest.
    pub fn scenarios(&self) -> Vec<LinearScenario> {
        let mut out = Vec::new();
        for rho in &self.multicollinearity {
            for resemblance in &self.target_resemblance_pct {
                for contamination in &self.contamination_pct {
                    out.push(LinearScenario {
                        multicollinearity: *rho,
                        n_outcome: self.n_outcome,
                        n_proxy_prompts: self.n_proxy_prompts,
                        target_resemblance_pct: *resemblance,
                        contamination_pct: *contamination,
                    });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NonTargetSetting {
    Shared,
    Independent,
}

impl From<NonTargetSetting> for NonTargetTasks {
    fn from(s: NonTargetSetting) -> Self {
        match s {
            NonTargetSetting::Shared => NonTargetTasks::Shared,
            NonTargetSetting::Independent => NonTargetTasks::Independent,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GpSweep {
    pub n_trajectories: usize,
    pub m_target: Vec<usize>,
    pub m_source: Vec<usize>,
    pub resolution: Vec<usize>,
    pub theta_star: Vec<f64>,
    pub contamination_pct: Vec<f64>,
    pub refinement_iterations: Vec<usize>,
    pub non_target_tasks: NonTargetSetting,
}

impl Default for GpSweep {
    fn default() -> Self {
        let s = GpScenario::default();
        Self {
            n_trajectories: s.n_trajectories,
            m_target: vec![s.m_target],
            m_source: vec![s.m_source],
            resolution: vec![s.resolution],
            theta_star: vec![s.theta_star],
            contamination_pct: vec![s.contamination_pct],
            refinement_iterations: vec![s.refinement_t],
            non_target_tasks: NonTargetSetting::Shared,
        }
    }
}

impl GpSweep {
    pub fn scenarios(&self) -> Vec<GpScenario> {
        let mut out = Vec::new();
        for m_source in &self.m_source {
            for resolution in &self.resolution {
                for t in &self.refinement_iterations {
                    for m_target in &self.m_target {
                        for theta_star in &self.theta_star {
                            for contamination in &self.contamination_pct {
                                out.push(GpScenario {
                                    n_trajectories: self.n_trajectories,
                                    m_target: *m_target,
                                    m_source: *m_source,
                                    resolution: *resolution,
                                    theta_star: *theta_star,
                                    contamination_pct: *contamination,
                                    refinement_t: *t,
                                    non_target_tasks: self.non_target_tasks.into(),
                                });
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

/// Sizes of the random discrete instances; `random_sizes` redraws them per
/// simulation within the limits of [`ToySpec::random`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToySettings {
    pub random_sizes: bool,
    pub theta_count: usize,
    pub psi_count: usize,
    pub outcome_count: usize,
    pub n: usize,
    pub proxy_outcomes: usize,
}

impl Default for ToySettings {
    fn default() -> Self {
        let s = ToySpec::default();
        Self {
            random_sizes: true,
            theta_count: s.theta_count,
            psi_count: s.psi_count,
            outcome_count: s.outcome_count,
            n: s.n,
            proxy_outcomes: s.proxy_outcomes,
        }
    }
}

impl ToySettings {
    pub fn spec(&self) -> ToySpec {
        ToySpec {
            theta_count: self.theta_count,
            psi_count: self.psi_count,
            outcome_count: self.outcome_count,
            n: self.n,
            proxy_outcomes: self.proxy_outcomes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SmokingSettings {
    pub data: Option<PathBuf>,
    pub proxy_modes: Vec<ProxyMode>,
    pub n_samples: usize,
}

impl Default for SmokingSettings {
    fn default() -> Self {
        Self {
            data: None,
            proxy_modes: ProxyMode::ALL.to_vec(),
            n_samples: 4000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default = "default_simulations")]
    pub n_simulations: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_grid")]
    pub grid_resolution: usize,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub parallelism: usize,
    #[serde(default)]
    pub relevance: RelevanceSettings,
    #[serde(default)]
    pub linear: LinearSweep,
    #[serde(default)]
    pub gp: GpSweep,
    #[serde(default)]
    pub toy: ToySettings,
    #[serde(default)]
    pub smoking: SmokingSettings,
}

fn default_simulations() -> usize {
    50
}

fn default_grid() -> usize {
    201
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind) -> Self {
        Self {
            experiment,
            n_simulations: default_simulations(),
            master_seed: 0,
            grid_resolution: default_grid(),
            output_dir: default_output(),
            parallelism: 0,
            relevance: RelevanceSettings::default(),
            linear: LinearSweep::default(),
            gp: GpSweep::default(),
            toy: ToySettings::default(),
            smoking: SmokingSettings::default(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(HarnessError::Config(msg));
        if self.n_simulations == 0 {
            return fail("n_simulations must be at least 1".into());
        }
        if self.grid_resolution < 2 {
            return fail("grid_resolution must be at least 2".into());
        }
        if self.relevance.refinement_iterations > MAX_REFINEMENT_ITERATIONS {
            return fail(format!(
                "refinement_iterations must be at most {MAX_REFINEMENT_ITERATIONS}"
            ));
        }
        match self.experiment {
            ExperimentKind::Linear => {
                let cells = self.linear.scenarios();
                if cells.is_empty() {
                    return fail("linear sweep has no cells".into());
                }
                for s in &cells {
                    s.validate()
                        .map_err(|e| HarnessError::Config(e.to_string()))?;
                }
            }
            ExperimentKind::Gp => {
                let cells = self.gp.scenarios();
                if cells.is_empty() {
                    return fail("gp sweep has no cells".into());
                }
                for s in &cells {
                    s.validate()
                        .map_err(|e| HarnessError::Config(e.to_string()))?;
                    if s.refinement_t > MAX_REFINEMENT_ITERATIONS {
                        return fail(format!(
                            "refinement_iterations must be at most {MAX_REFINEMENT_ITERATIONS}"
                        ));
                    }
                }
            }
            ExperimentKind::ToyVerify => {
                if !self.toy.random_sizes {
                    self.toy
                        .spec()
                        .validate()
                        .map_err(|e| HarnessError::Config(e.to_string()))?;
                }
            }
            ExperimentKind::Smoking => {
                if self.smoking.proxy_modes.is_empty() {
                    return fail("smoking.proxy_modes must not be empty".into());
                }
                if self.smoking.n_samples < prompt_core::inference::MIN_SAMPLES {
                    return fail(format!(
                        "smoking.n_samples must be at least {}",
                        prompt_core::inference::MIN_SAMPLES
                    ));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_in() {
        let c = ExperimentConfig::parse("experiment = \"linear\"").unwrap();
        assert_eq!(c.n_simulations, 50);
        assert_eq!(c.grid_resolution, 201);
        assert_eq!(c.linear.scenarios().len(), 3);
    }

    #[test]
    fn unknown_keys_fail() {
        assert!(ExperimentConfig::parse("experiment = \"linear\"\nbogus = 1").is_err());
        assert!(ExperimentConfig::parse("experiment = \"linear\"\n[linear]\nrho = [1.0]").is_err());
        assert!(ExperimentConfig::parse("experiment = \"quadratic\"").is_err());
    }

    #[test]
    fn rejects_bad_values() {
        assert!(ExperimentConfig::parse("experiment = \"linear\"\nn_simulations = 0").is_err());
        assert!(ExperimentConfig::parse(
            "experiment = \"linear\"\n[linear]\ncontamination_pct = [120.0]"
        )
        .is_err());
        assert!(ExperimentConfig::parse("experiment = \"gp\"\n[gp]\nm_source = [30]").is_err());
    }

    #[test]
    fn round_trips() {
        let c = ExperimentConfig::new(ExperimentKind::Gp);
        assert_eq!(ExperimentConfig::parse(&c.to_toml()).unwrap(), c);
    }
}
