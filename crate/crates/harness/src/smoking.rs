//! Smoking-cessation comparison: leave-one-study-out prediction of a held-out
//! study's quit counts by the r-weighted and classic learners.
//!
//! The r-weighted learner has four treatment effects and one intercept for
//! the held-out study. Its source likelihood is tempered by sigmoid-ratio
//! relevance. The classic learner knows which study each arm belongs to: it
//! has the treatment effects, one intercept per source study and a
//! held-out-study intercept informed only by the proxy. Both are sampled by
//! Metropolis, with `N(0, 3)` priors on every effect.

use std::collections::BTreeSet;
use std::path::Path;

use prompt_core::inference::{
    metropolis, metropolis_posterior, McmcChain, MetropolisConfig, ProxyObservation,
};
use prompt_core::math::{normal_log_pdf, LogSumExp};
use prompt_core::model::{
    binomial_logit_model, BinomialLogitModel, IntervalBox, Model, Observation, SharedParam,
    TaskParam, TREATMENT_LEVELS,
};
use prompt_core::relevance::sigmoid_ratio_weights;
use prompt_core::rng::task_rng;
use prompt_core::synthetic::gen_imprecise_estimate_proxy_with;
use rand::RngCore;
use rayon::prelude::*;

use crate::config::ProxyMode;
use crate::error::{HarnessError, Result};

pub const EFFECT_PRIOR_SD: f64 = 3.0;
pub const EXPECTED_STUDIES: usize = 24;
const PARAM_BOUND: f64 = 10.0;
const INITIAL_SCALE: f64 = 0.3;
const PREDICTIVE_BATCHES: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SmokingRecord {
    pub study_id: String,
    /// Index into [`TREATMENT_LEVELS`].
    pub treatment: usize,
    pub events: u64,
    pub total: u64,
}

impl SmokingRecord {
    pub fn treatment_label(&self) -> &'static str {
        TREATMENT_LEVELS[self.treatment]
    }

    pub fn observation(&self) -> Observation {
        Observation::count(
            BinomialLogitModel::indicator(self.treatment),
            self.events,
            Some(self.total),
        )
    }
}

/// The bundled 24-study, 50-arm network.
pub const BUNDLED_DATA: &str = include_str!("../data/smokingcessation.csv");

/// Reads `path`, or the bundled data when `None`.
pub fn load_smoking(path: Option<&Path>) -> Result<Vec<SmokingRecord>> {
    match path {
        Some(p) => ingest_smoking_csv(p),
        None => parse_smoking_csv(BUNDLED_DATA, Path::new("<bundled smokingcessation.csv>")),
    }
}

const COLUMNS: [&str; 4] = ["study", "treatment", "events", "total"];

/// Parses `study,treatment,events,total` rows.
pub fn ingest_smoking_csv(path: &Path) -> Result<Vec<SmokingRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    parse_smoking_csv(&text, path)
}

pub fn parse_smoking_csv(text: &str, path: &Path) -> Result<Vec<SmokingRecord>> {
    if text.trim().is_empty() {
        return Err(HarnessError::EmptyInput(path.to_path_buf()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let mut idx = [0usize; 4];
    for (slot, name) in idx.iter_mut().zip(COLUMNS) {
        *slot =
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| HarnessError::MissingColumn {
                    path: path.to_path_buf(),
                    column: name.into(),
                })?;
    }
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| HarnessError::Malformed {
            path: path.to_path_buf(),
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let malformed = |message: String| HarnessError::Malformed {
            path: path.to_path_buf(),
            line,
            message,
        };
        let field = |k: usize| {
            record
                .get(idx[k])
                .ok_or_else(|| malformed(format!("missing value for '{}'", COLUMNS[k])))
        };
        let study_id = field(0)?.to_string();
        if study_id.is_empty() {
            return Err(malformed("empty study id".into()));
        }
        let t = field(1)?;
        let treatment = TREATMENT_LEVELS
            .iter()
            .position(|l| *l == t)
            .ok_or_else(|| malformed(format!("unknown treatment '{t}'")))?;
        let events: u64 = field(2)?
            .parse()
            .map_err(|_| malformed(format!("bad events '{}'", &record[idx[2]])))?;
        let total: u64 = field(3)?
            .parse()
            .map_err(|_| malformed(format!("bad total '{}'", &record[idx[3]])))?;
        if total == 0 {
            return Err(malformed("total must be positive".into()));
        }
        if events > total {
            return Err(malformed(format!("events {events} exceed total {total}")));
        }
        out.push(SmokingRecord {
            study_id,
            treatment,
            events,
            total,
        });
    }
    if out.is_empty() {
        return Err(HarnessError::EmptyInput(path.to_path_buf()));
    }
    Ok(out)
}

/// Distinct study ids in first-appearance order.
pub fn studies(records: &[SmokingRecord]) -> Vec<String> {
    let mut seen = BTreeSet::new();
    records
        .iter()
        .filter(|r| seen.insert(r.study_id.clone()))
        .map(|r| r.study_id.clone())
        .collect()
}

pub fn study_count_warning(records: &[SmokingRecord]) -> Option<String> {
    let n = studies(records).len();
    (n != EXPECTED_STUDIES).then(|| format!("expected {EXPECTED_STUDIES} studies, found {n}"))
}

/// Training arms and held-out arms for each left-out study.
pub fn leave_one_study_out(
    records: &[SmokingRecord],
) -> Vec<(String, Vec<SmokingRecord>, Vec<SmokingRecord>)> {
    studies(records)
        .into_iter()
        .map(|s| {
            let (held, train): (Vec<_>, Vec<_>) =
                records.iter().cloned().partition(|r| r.study_id == s);
            (s, train, held)
        })
        .collect()
}

fn effect_prior(values: &[f64]) -> f64 {
    values
        .iter()
        .map(|v| normal_log_pdf(*v, 0.0, EFFECT_PRIOR_SD))
        .sum()
}

/// Fixed-effects log density over `[θ₁…θ₄, α₁…α_S]`, each arm using its
/// study's intercept, plus an optional extra coordinate informed by `extra`.
fn fixed_effects_log_density(
    model: &BinomialLogitModel,
    arms: &[(usize, Observation)],
    x: &[f64],
    extra: Option<&ProxyObservation>,
) -> f64 {
    let theta = &x[..4];
    let mut total = effect_prior(x);
    for (study, obs) in arms {
        let y = obs.outcome.as_count().expect("count outcome");
        total += model.log_pmf(
            y,
            obs.trial_count.expect("trial count"),
            &obs.covariates,
            theta,
            &x[4 + study..5 + study],
        );
    }
    if let Some(proxy) = extra {
        let last = x[x.len() - 1];
        total += proxy.log_likelihood(&TaskParam::scalar(last));
    }
    total
}

fn study_indexed(records: &[SmokingRecord]) -> (Vec<String>, Vec<(usize, Observation)>) {
    let ids = studies(records);
    let arms = records
        .iter()
        .map(|r| {
            (
                ids.iter()
                    .position(|s| *s == r.study_id)
                    .expect("known study"),
                r.observation(),
            )
        })
        .collect();
    (ids, arms)
}

fn fixed_effects_chain(
    records: &[SmokingRecord],
    proxy: Option<&ProxyObservation>,
    n_samples: usize,
    seed: u64,
) -> Result<(Vec<String>, McmcChain)> {
    let model = binomial_logit_model();
    let (ids, arms) = study_indexed(records);
    let dim = 4 + ids.len() + usize::from(proxy.is_some());
    let config = MetropolisConfig {
        n_samples,
        initial: vec![0.0; dim],
        initial_scales: vec![INITIAL_SCALE; dim],
        support: IntervalBox::cube(dim, -PARAM_BOUND, PARAM_BOUND),
        seed,
    };
    let chain = metropolis(
        |x| fixed_effects_log_density(&model, &arms, x, proxy),
        &config,
        4,
    )?;
    Ok((ids, chain))
}

/// Posterior mean of each study's intercept under the all-data
/// fixed-effects model.
pub fn fixed_effect_intercepts(
    records: &[SmokingRecord],
    n_samples: usize,
    seed: u64,
) -> Result<Vec<(String, f64)>> {
    let (ids, chain) = fixed_effects_chain(records, None, n_samples, seed)?;
    Ok(ids
        .into_iter()
        .enumerate()
        .map(|(k, id)| {
            let xs = chain.coordinate(4 + k);
            (id, xs.iter().sum::<f64>() / xs.len() as f64)
        })
        .collect())
}

/// Log of the equal-weight mixture predictive and its Monte Carlo standard
/// error, from per-draw log densities, using batch means.
pub fn log_predictive(per_draw: &[f64]) -> (f64, f64) {
    let mut acc = LogSumExp::new();
    per_draw.iter().for_each(|v| acc.add(*v));
    let log_mean = acc.value() - (per_draw.len() as f64).ln();
    let size = (per_draw.len() / PREDICTIVE_BATCHES).max(1);
    let ratios: Vec<f64> = per_draw
        .chunks(size)
        .filter(|c| c.len() == size)
        .map(|c| c.iter().map(|v| (v - log_mean).exp()).sum::<f64>() / c.len() as f64)
        .collect();
    let k = ratios.len() as f64;
    if ratios.len() < 2 {
        return (log_mean, f64::NAN);
    }
    let m = ratios.iter().sum::<f64>() / k;
    let var = ratios.iter().map(|r| (r - m) * (r - m)).sum::<f64>() / (k - 1.0);
    // Delta method: se(log p̂) ≈ se(p̂)/p̂, with p̂ scaled to 1.
    (log_mean, (var / k).sqrt())
}

fn held_out_log_densities(
    model: &BinomialLogitModel,
    held: &[Observation],
    draws: impl Iterator<Item = (Vec<f64>, f64)>,
) -> Vec<f64> {
    draws
        .map(|(theta, psi)| {
            held.iter()
                .map(|o| {
                    model.log_pmf(
                        o.outcome.as_count().unwrap(),
                        o.trial_count.unwrap(),
                        &o.covariates,
                        &theta,
                        &[psi],
                    )
                })
                .sum()
        })
        .collect()
}

/// One held-out study under one proxy mode.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionResult {
    pub study: String,
    pub proxy_mode: ProxyMode,
    pub seed: u64,
    pub psi_star: f64,
    pub z: f64,
    pub log_pred_rweighted: f64,
    pub se_rweighted: f64,
    pub log_pred_classic: f64,
    pub se_classic: f64,
    /// `log p^R(d_{n+1} | d, z) − log p(d_{n+1} | d, z)`.
    pub log_ratio: f64,
    pub acceptance_rweighted: f64,
    pub acceptance_classic: f64,
    pub warnings: Vec<String>,
}

/// Posterior-predictive log density of held-out arms under one learner.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnerPredictive {
    pub log_pred: f64,
    /// Batch-means standard error of `log_pred`.
    pub se: f64,
    pub acceptance_rate: f64,
    pub warnings: Vec<String>,
}

/// `psi_coordinate` locates the target intercept in each chain point; `None`
/// means the last coordinate.
fn predictive(
    chain: &McmcChain,
    held: &[SmokingRecord],
    psi_coordinate: Option<usize>,
) -> LearnerPredictive {
    let model = binomial_logit_model();
    let held_obs: Vec<Observation> = held.iter().map(SmokingRecord::observation).collect();
    let draws = chain
        .points()
        .iter()
        .map(|x| (x[..4].to_vec(), x[psi_coordinate.unwrap_or(x.len() - 1)]));
    let (log_pred, se) = log_predictive(&held_out_log_densities(&model, &held_obs, draws));
    LearnerPredictive {
        log_pred,
        se,
        acceptance_rate: chain.acceptance_rate,
        warnings: chain.warnings.clone(),
    }
}

/// Single-intercept learner: source arms tempered by sigmoid-ratio
/// relevance, the intercept informed by `proxy`.
pub fn rweighted_predictive(
    train: &[SmokingRecord],
    held: &[SmokingRecord],
    proxy: &ProxyObservation,
    n_samples: usize,
    seed: u64,
) -> Result<LearnerPredictive> {
    let model = binomial_logit_model();
    let data: Vec<Observation> = train.iter().map(SmokingRecord::observation).collect();
    let origin = SharedParam::new(vec![0.0; 4])?;
    let chain = metropolis_posterior(
        &model,
        &data,
        proxy,
        |psi: &TaskParam| sigmoid_ratio_weights(&model.log_likelihood_batch(&data, &origin, psi)?),
        |theta: &SharedParam, psi: &TaskParam| {
            effect_prior(theta.values()) + effect_prior(psi.values())
        },
        n_samples,
        seed,
        (SharedParam::new(vec![0.0; 4])?, TaskParam::scalar(0.0)),
        vec![INITIAL_SCALE; 5],
    )?;
    Ok(predictive(&chain, held, Some(4)))
}

/// Known-groups learner: one intercept per source study, the held-out
/// study's intercept informed only by `proxy`.
pub fn classic_predictive(
    train: &[SmokingRecord],
    held: &[SmokingRecord],
    proxy: &ProxyObservation,
    n_samples: usize,
    seed: u64,
) -> Result<LearnerPredictive> {
    let (_, chain) = fixed_effects_chain(train, Some(proxy), n_samples, seed)?;
    Ok(predictive(&chain, held, None))
}

#[allow(clippy::too_many_arguments)]
fn run_partition(
    study: &str,
    train: &[SmokingRecord],
    held: &[SmokingRecord],
    psi_star: f64,
    mode: ProxyMode,
    n_samples: usize,
    seed: u64,
    rng: &mut dyn RngCore,
) -> Result<PartitionResult> {
    let (sigma, bias) = mode.settings();
    let proxy = gen_imprecise_estimate_proxy_with(psi_star, sigma, bias, rng)?;
    let (seed_r, seed_c) = (rng.next_u64(), rng.next_u64());
    let r = rweighted_predictive(train, held, &proxy.observation, n_samples, seed_r)?;
    let c = classic_predictive(train, held, &proxy.observation, n_samples, seed_c)?;
    let mut warnings: Vec<String> = r
        .warnings
        .iter()
        .map(|w| format!("r-weighted: {w}"))
        .collect();
    warnings.extend(c.warnings.iter().map(|w| format!("classic: {w}")));
    Ok(PartitionResult {
        study: study.to_string(),
        proxy_mode: mode,
        seed,
        psi_star,
        z: proxy.z,
        log_pred_rweighted: r.log_pred,
        se_rweighted: r.se,
        log_pred_classic: c.log_pred,
        se_classic: c.se,
        log_ratio: r.log_pred - c.log_pred,
        acceptance_rweighted: r.acceptance_rate,
        acceptance_classic: c.acceptance_rate,
        warnings,
    })
}

/// Every leave-one-study-out partition under each proxy mode. Partition `k`
/// of mode `m` uses stream `m·S + k` of `seed`, where `S` is the number of
/// studies; stream `M·S` (after all modes) drives the all-data fit that sets
/// each study's `ψ*`.
pub fn run_smoking_comparison(
    records: &[SmokingRecord],
    modes: &[ProxyMode],
    n_samples: usize,
    seed: u64,
) -> Result<Vec<PartitionResult>> {
    let partitions = leave_one_study_out(records);
    if partitions.len() < 2 {
        return Err(HarnessError::Config(
            "smoking comparison needs at least two studies".into(),
        ));
    }
    let s = partitions.len();
    let fit_seed = task_rng(seed, (modes.len() * s) as u64).next_u64();
    let intercepts = fixed_effect_intercepts(records, n_samples, fit_seed)?;
    (0..modes.len() * s)
        .into_par_iter()
        .map(|index| {
            let (mode, k) = (modes[index / s], index % s);
            let (study, train, held) = &partitions[k];
            let psi_star = intercepts
                .iter()
                .find(|(id, _)| id == study)
                .map(|(_, v)| *v)
                .expect("fitted study");
            let mut rng = task_rng(seed, index as u64);
            run_partition(
                study, train, held, psi_star, mode, n_samples, seed, &mut rng,
            )
        })
        .collect()
}

/// Log ratios grouped by proxy mode, in the order of `modes`.
pub fn log_ratios_by_mode(
    results: &[PartitionResult],
    modes: &[ProxyMode],
) -> Vec<(String, Vec<f64>)> {
    modes
        .iter()
        .map(|m| {
            let v = results
                .iter()
                .filter(|r| r.proxy_mode == *m)
                .map(|r| r.log_ratio)
                .collect();
            (m.label().to_string(), v)
        })
        .collect()
}

pub const SMOKING_HEADER: [&str; 13] = [
    "study",
    "proxy_mode",
    "seed",
    "psi_star",
    "z",
    "log_pred_rweighted",
    "se_rweighted",
    "log_pred_classic",
    "se_classic",
    "log_ratio",
    "acceptance_rweighted",
    "acceptance_classic",
    "warnings",
];

pub fn emit_smoking_csv(results: &[PartitionResult], path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)?;
    w.write_record(SMOKING_HEADER)?;
    for r in results {
        w.write_record([
            r.study.clone(),
            r.proxy_mode.label().to_string(),
            r.seed.to_string(),
            r.psi_star.to_string(),
            r.z.to_string(),
            r.log_pred_rweighted.to_string(),
            r.se_rweighted.to_string(),
            r.log_pred_classic.to_string(),
            r.se_classic.to_string(),
            r.log_ratio.to_string(),
            r.acceptance_rweighted.to_string(),
            r.acceptance_classic.to_string(),
            r.warnings.join("; "),
        ])?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Vec<SmokingRecord>> {
        parse_smoking_csv(text, Path::new("test.csv"))
    }

    #[test]
    fn parses_first_row() {
        let r = parse("study,treatment,events,total\n01,A,9,140\n").unwrap();
        assert_eq!(
            r[0],
            SmokingRecord {
                study_id: "01".into(),
                treatment: 0,
                events: 9,
                total: 140
            }
        );
    }

    #[test]
    fn reports_errors() {
        let missing = parse("study,treatment,events\n01,A,9\n").unwrap_err();
        assert!(missing.to_string().contains("'total'"), "{missing}");
        assert!(matches!(parse(""), Err(HarnessError::EmptyInput(_))));
        let over = parse("study,treatment,events,total\n01,A,9,140\n02,B,12,10\n").unwrap_err();
        assert!(over.to_string().contains("line 3"), "{over}");
        assert!(parse("study,treatment,events,total\n01,E,1,2\n").is_err());
        assert!(parse("study,treatment,events,total\n01,A,x,2\n").is_err());
    }

    #[test]
    fn partitions_hold_out_each_study() {
        let r = parse("study,treatment,events,total\n1,A,1,10\n1,B,2,10\n2,A,3,10\n").unwrap();
        let p = leave_one_study_out(&r);
        assert_eq!(p.len(), 2);
        assert_eq!(p[0].2.len(), 2);
        assert_eq!(p[0].1.len(), 1);
        assert_eq!(
            study_count_warning(&r).unwrap(),
            "expected 24 studies, found 2"
        );
    }

    #[test]
    fn bundled_data_shape() {
        let r = load_smoking(None).unwrap();
        assert_eq!(r.len(), 50);
        assert_eq!(studies(&r).len(), EXPECTED_STUDIES);
        assert!(study_count_warning(&r).is_none());
    }

    #[test]
    fn predictive_of_constant_draws() {
        let (lp, se) = log_predictive(&[-2.0; 400]);
        assert!((lp + 2.0).abs() < 1e-12);
        assert!(se.abs() < 1e-12);
    }
}
