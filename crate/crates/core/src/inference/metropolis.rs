use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use super::proxy::ProxyLikelihood;
use crate::error::{Error, Result};
use crate::math::tempered;
use crate::model::{IntervalBox, Model, Observation, SharedParam, TaskParam};
use crate::rng::seeded_rng;

const ADAPT_BATCH: usize = 50;
const TARGET_ACCEPTANCE: f64 = 0.3;
const ACCEPTANCE_BAND: (f64, f64) = (0.1, 0.6);
const JOINT_TARGET_ACCEPTANCE: f64 = 0.234;
/// Burn-in sweeps collected before the first joint move.
const JOINT_WARMUP: usize = 2 * ADAPT_BATCH;
const COVARIANCE_FLOOR: f64 = 1e-10;
pub const MIN_SAMPLES: usize = 1000;

/// Coordinate-wise Gaussian random-walk Metropolis settings.
#[derive(Debug, Clone)]
pub struct MetropolisConfig {
    /// Retained sweeps. Burn-in adds a further third, so it makes up a
    /// quarter of all sweeps.
    pub n_samples: usize,
    pub initial: Vec<f64>,
    pub initial_scales: Vec<f64>,
    pub support: IntervalBox,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct McmcChain {
    points: Vec<Vec<f64>>,
    theta_dim: usize,
    pub acceptance_rate: f64,
    pub accepted: u64,
    pub proposed: u64,
    pub seed: u64,
    pub scales: Vec<f64>,
    /// Acceptance of the joint moves alone; `None` in one dimension.
    pub joint_acceptance_rate: Option<f64>,
    pub warnings: Vec<String>,
}

impl McmcChain {
    /// Retained points, each `[θ…, ψ…]`.
    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn samples(&self) -> Vec<(SharedParam, TaskParam)> {
        self.points
            .iter()
            .map(|x| {
                (
                    SharedParam::new(x[..self.theta_dim].to_vec()).expect("chain point is finite"),
                    TaskParam::new(x[self.theta_dim..].to_vec()).expect("chain point is finite"),
                )
            })
            .collect()
    }

    pub fn coordinate(&self, k: usize) -> Vec<f64> {
        self.points.iter().map(|x| x[k]).collect()
    }
}

/// Running mean and covariance of burn-in points.
struct Moments {
    count: f64,
    mean: DVector<f64>,
    scatter: DMatrix<f64>,
}

impl Moments {
    fn new(dim: usize) -> Self {
        Self {
            count: 0.0,
            mean: DVector::zeros(dim),
            scatter: DMatrix::zeros(dim, dim),
        }
    }

    fn push(&mut self, x: &[f64]) {
        let x = DVector::from_column_slice(x);
        self.count += 1.0;
        let delta = &x - &self.mean;
        self.mean += &delta / self.count;
        self.scatter += &delta * (&x - &self.mean).transpose();
    }

    /// Cholesky factor of the covariance with a small diagonal floor.
    fn factor(&self) -> Option<DMatrix<f64>> {
        let dim = self.mean.len();
        let mut cov = &self.scatter / (self.count - 1.0).max(1.0);
        for k in 0..dim {
            cov[(k, k)] += COVARIANCE_FLOOR.max(cov[(k, k)] * 1e-6);
        }
        Cholesky::new(cov).map(|c| c.l())
    }
}

/// Samples `exp(log_target)` on `config.support`.
///
/// Each sweep updates every coordinate in turn and then, in two or more
/// dimensions, proposes one joint Gaussian step whose covariance is the
/// running covariance of the burn-in points. Per-coordinate scales adapt
/// toward 30% acceptance and the joint step's overall scale toward 23.4%.
/// Everything adapts only during burn-in and is frozen afterwards, so
/// retained points come from a fixed Metropolis kernel. `theta_dim` only
/// controls how points split into `(θ, ψ)` pairs.
pub fn metropolis<F>(
    log_target: F,
    config: &MetropolisConfig,
    theta_dim: usize,
) -> Result<McmcChain>
where
    F: Fn(&[f64]) -> f64,
{
    let dim = config.initial.len();
    if config.n_samples < MIN_SAMPLES {
        return Err(Error::Validation(format!(
            "need at least {MIN_SAMPLES} samples"
        )));
    }
    if dim == 0
        || config.initial_scales.len() != dim
        || config.support.dim() != dim
        || theta_dim > dim
    {
        return Err(Error::Validation(
            "initial point, scales and support dimensions differ".into(),
        ));
    }
    if config
        .initial_scales
        .iter()
        .any(|s| !(s.is_finite() && *s > 0.0))
    {
        return Err(Error::Validation("proposal scales must be positive".into()));
    }
    if !config.support.contains(&config.initial) {
        return Err(Error::Initialization(format!(
            "initial point {:?} outside support",
            config.initial
        )));
    }
    let mut x = config.initial.clone();
    let mut current = log_target(&x);
    if !current.is_finite() {
        return Err(Error::Initialization(format!(
            "log target is {current} at the initial point"
        )));
    }

    let mut rng = seeded_rng(config.seed);
    let mut scales = config.initial_scales.clone();
    let burn_in = config.n_samples.div_ceil(3);
    let bounds = config.support.bounds();
    let mut batch_accepts = vec![0usize; dim];
    let mut points = Vec::with_capacity(config.n_samples);
    let (mut accepted, mut proposed) = (0u64, 0u64);

    let joint = dim >= 2;
    let mut moments = Moments::new(dim);
    let mut joint_factor: Option<DMatrix<f64>> = None;
    let mut joint_scale = 2.38 / (dim as f64).sqrt();
    let (mut joint_batch, mut joint_accepted, mut joint_proposed) = (0usize, 0u64, 0u64);

    for sweep in 0..burn_in + config.n_samples {
        let adapting = sweep < burn_in;
        for k in 0..dim {
            let step: f64 = rng.sample(StandardNormal);
            let old = x[k];
            let cand = old + scales[k] * step;
            let mut accept = false;
            if cand >= bounds[k].0 && cand <= bounds[k].1 {
                x[k] = cand;
                let lp = log_target(&x);
                if lp.is_nan() {
                    return Err(Error::Numerical(format!("log target NaN at {x:?}")));
                }
                let u: f64 = rng.random();
                if u.ln() < lp - current {
                    current = lp;
                    accept = true;
                } else {
                    x[k] = old;
                }
            }
            if adapting {
                batch_accepts[k] += usize::from(accept);
            } else {
                proposed += 1;
                accepted += u64::from(accept);
            }
        }
        if let Some(l) = &joint_factor {
            let z = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
            let step = l * z * joint_scale;
            let cand: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let mut accept = false;
            if config.support.contains(&cand) {
                let lp = log_target(&cand);
                if lp.is_nan() {
                    return Err(Error::Numerical(format!("log target NaN at {cand:?}")));
                }
                let u: f64 = rng.random();
                if u.ln() < lp - current {
                    current = lp;
                    x = cand;
                    accept = true;
                }
            }
            if adapting {
                joint_batch += usize::from(accept);
            } else {
                proposed += 1;
                accepted += u64::from(accept);
                joint_proposed += 1;
                joint_accepted += u64::from(accept);
            }
        }
        if adapting && joint {
            moments.push(&x);
        }
        if adapting && (sweep + 1) % ADAPT_BATCH == 0 {
            for k in 0..dim {
                let rate = batch_accepts[k] as f64 / ADAPT_BATCH as f64;
                scales[k] *= (2.0 * (rate - TARGET_ACCEPTANCE)).exp();
                batch_accepts[k] = 0;
            }
            if joint_factor.is_some() {
                let rate = joint_batch as f64 / ADAPT_BATCH as f64;
                joint_scale *= (2.0 * (rate - JOINT_TARGET_ACCEPTANCE)).exp();
                joint_batch = 0;
            }
            if joint && sweep + 1 >= JOINT_WARMUP {
                if let Some(l) = moments.factor() {
                    joint_factor = Some(l);
                }
            }
        }
        if !adapting {
            points.push(x.clone());
        }
    }

    let acceptance_rate = accepted as f64 / proposed as f64;
    let mut warnings = Vec::new();
    if !(ACCEPTANCE_BAND.0..=ACCEPTANCE_BAND.1).contains(&acceptance_rate) {
        warnings.push(format!(
            "acceptance rate {acceptance_rate:.3} outside [{}, {}] after adaptation",
            ACCEPTANCE_BAND.0, ACCEPTANCE_BAND.1
        ));
    }
    Ok(McmcChain {
        points,
        theta_dim,
        acceptance_rate,
        accepted,
        proposed,
        seed: config.seed,
        scales,
        joint_acceptance_rate: (joint_proposed > 0)
            .then(|| joint_accepted as f64 / joint_proposed as f64),
        warnings,
    })
}

/// Metropolis on the relevance-weighted density
/// `prior(θ, ψ) · Πᵢ p(dᵢ | θ, ψ)^{wᵢ(ψ)} · p(z | ψ)` over the model's support.
#[allow(clippy::too_many_arguments)]
pub fn metropolis_posterior<W, P>(
    model: &dyn Model,
    data: &[Observation],
    proxy: &(impl ProxyLikelihood + ?Sized),
    weights_fn: W,
    prior_log_density: P,
    n_samples: usize,
    seed: u64,
    initial: (SharedParam, TaskParam),
    initial_scales: Vec<f64>,
) -> Result<McmcChain>
where
    W: Fn(&TaskParam) -> Result<Vec<f64>>,
    P: Fn(&SharedParam, &TaskParam) -> f64,
{
    let kt = model.theta_dim();
    let mut bounds = model.theta_support().bounds().to_vec();
    bounds.extend_from_slice(model.psi_support().bounds());
    let mut init = initial.0.into_inner();
    init.extend(initial.1.into_inner());
    let config = MetropolisConfig {
        n_samples,
        initial: init,
        initial_scales,
        support: IntervalBox::new(bounds),
        seed,
    };
    let target = |x: &[f64]| -> f64 {
        let (Ok(theta), Ok(psi)) = (
            SharedParam::new(x[..kt].to_vec()),
            TaskParam::new(x[kt..].to_vec()),
        ) else {
            return f64::NEG_INFINITY;
        };
        let prior = prior_log_density(&theta, &psi);
        if prior == f64::NEG_INFINITY {
            return prior;
        }
        let (Ok(w), Ok(ll)) = (
            weights_fn(&psi),
            model.log_likelihood_batch(data, &theta, &psi),
        ) else {
            return f64::NAN;
        };
        prior
            + proxy.proxy_log_likelihood(&psi)
            + ll.iter()
                .zip(&w)
                .map(|(l, w)| tempered(*w, *l))
                .sum::<f64>()
    };
    metropolis(target, &config, kt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{mean_and_se, normal_log_pdf};

    fn config(seed: u64, n: usize) -> MetropolisConfig {
        MetropolisConfig {
            n_samples: n,
            initial: vec![0.0, 0.0],
            initial_scales: vec![1.0, 1.0],
            support: IntervalBox::cube(2, -20.0, 20.0),
            seed,
        }
    }

    #[test]
    fn prior_only_target_recovers_means() {
        let chain = metropolis(
            |x| normal_log_pdf(x[0], 1.5, 1.0) + normal_log_pdf(x[1], -2.0, 0.5),
            &config(3, 40_000),
            1,
        )
        .unwrap();
        assert!(chain.warnings.is_empty(), "{:?}", chain.warnings);
        // Batch means account for autocorrelation.
        for (k, mean) in [(0, 1.5), (1, -2.0)] {
            let xs = chain.coordinate(k);
            let batches: Vec<f64> = xs
                .chunks(1000)
                .map(|c| c.iter().sum::<f64>() / c.len() as f64)
                .collect();
            let (m, se) = mean_and_se(&batches);
            assert!(
                (m - mean).abs() < 3.0 * se,
                "coord {k}: {m} vs {mean} (se {se})"
            );
        }
    }

    #[test]
    fn joint_moves_cross_a_narrow_ridge() {
        // x₀ + x₁ is pinned to within 0.05 while each coordinate has prior
        // sd 3, so x₀ − x₁ has variance 2·9·(1 − ε) ≈ 18.
        let target =
            |x: &[f64]| -0.5 * ((x[0] + x[1]) / 0.05).powi(2) - (x[0] * x[0] + x[1] * x[1]) / 18.0;
        let mut cfg = config(5, 20_000);
        cfg.initial_scales = vec![0.3, 0.3];
        let chain = metropolis(target, &cfg, 1).unwrap();
        let d: Vec<f64> = chain.points().iter().map(|x| x[0] - x[1]).collect();
        let m = d.iter().sum::<f64>() / d.len() as f64;
        let v = d.iter().map(|a| (a - m).powi(2)).sum::<f64>() / d.len() as f64;
        assert!((v - 18.0).abs() < 4.0, "ridge variance {v}");
        assert!(chain.joint_acceptance_rate.unwrap() > 0.1);
    }

    #[test]
    fn non_finite_start_is_rejected() {
        let err = metropolis(|_| f64::NEG_INFINITY, &config(1, 1000), 1).unwrap_err();
        assert!(matches!(err, Error::Initialization(_)));
        assert!(metropolis(|_| 0.0, &config(1, 10), 1).is_err());
    }

    #[test]
    fn seeded_chains_repeat() {
        let a = metropolis(|x| -0.5 * (x[0] * x[0] + x[1] * x[1]), &config(9, 1000), 1).unwrap();
        let b = metropolis(|x| -0.5 * (x[0] * x[0] + x[1] * x[1]), &config(9, 1000), 1).unwrap();
        assert_eq!(a.points(), b.points());
        // Two coordinate moves and one joint move per retained sweep.
        assert_eq!(a.proposed, 3000);
    }
}
