use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::ParameterGrid;
use crate::math::normalize_log;
use crate::model::TaskParam;

/// Proxy information `z`: a payload plus the learner's model of how it
/// depends on the target task parameter. The likelihood never sees `θ`.
#[derive(Clone)]
pub struct ProxyObservation {
    payload: ProxyPayload,
    log_lik: Arc<dyn Fn(&ProxyPayload, &TaskParam) -> f64 + Send + Sync>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProxyPayload {
    None,
    Real(Vec<f64>),
    Count(u64),
}

impl fmt::Debug for ProxyObservation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProxyObservation")
            .field("payload", &self.payload)
            .finish_non_exhaustive()
    }
}

impl ProxyObservation {
    pub fn new<F>(payload: ProxyPayload, log_lik: F) -> Self
    where
        F: Fn(&ProxyPayload, &TaskParam) -> f64 + Send + Sync + 'static,
    {
        Self {
            payload,
            log_lik: Arc::new(log_lik),
        }
    }

    /// Proxy with constant likelihood: leaves the ψ prior unchanged.
    pub fn uninformative() -> Self {
        Self::new(ProxyPayload::None, |_, _| 0.0)
    }

    /// Proxy whose likelihood is one at `psi` and zero elsewhere.
    pub fn one_hot(psi: TaskParam) -> Self {
        Self::new(
            ProxyPayload::Real(psi.values().to_vec()),
            move |payload, candidate| match payload {
                ProxyPayload::Real(v) if v.as_slice() == candidate.values() => 0.0,
                _ => f64::NEG_INFINITY,
            },
        )
    }

    pub fn payload(&self) -> &ProxyPayload {
        &self.payload
    }

    pub fn log_likelihood(&self, psi: &TaskParam) -> f64 {
        (self.log_lik)(&self.payload, psi)
    }

    /// Same likelihood model evaluated at a different payload.
    pub fn with_payload(&self, payload: ProxyPayload) -> Self {
        Self {
            payload,
            log_lik: Arc::clone(&self.log_lik),
        }
    }
}

/// Anything that supplies `log p(z | ψ)`. Independent proxy observations
/// combine by summing log-likelihoods.
pub trait ProxyLikelihood: Sync {
    fn proxy_log_likelihood(&self, psi: &TaskParam) -> f64;
}

impl ProxyLikelihood for ProxyObservation {
    fn proxy_log_likelihood(&self, psi: &TaskParam) -> f64 {
        self.log_likelihood(psi)
    }
}

impl ProxyLikelihood for [ProxyObservation] {
    fn proxy_log_likelihood(&self, psi: &TaskParam) -> f64 {
        self.iter().map(|z| z.log_likelihood(psi)).sum()
    }
}

impl ProxyLikelihood for Vec<ProxyObservation> {
    fn proxy_log_likelihood(&self, psi: &TaskParam) -> f64 {
        self.as_slice().proxy_log_likelihood(psi)
    }
}

/// Proxy log-likelihood at every ψ node. NaN is rejected.
pub fn proxy_log_likelihoods(
    grid: &ParameterGrid,
    proxy: &(impl ProxyLikelihood + ?Sized),
) -> Result<Vec<f64>> {
    let values: Vec<f64> = grid
        .psi_nodes()
        .iter()
        .map(|p| proxy.proxy_log_likelihood(p))
        .collect();
    if values.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
        return Err(Error::Numerical(
            "proxy log-likelihood is NaN or +inf".into(),
        ));
    }
    if values.iter().all(|v| *v == f64::NEG_INFINITY) {
        return Err(Error::DegenerateProxy);
    }
    Ok(values)
}

/// Posterior mass over ψ nodes given proxy information, and the log
/// normalizer `log Σ_j p(z | ψ_j) p(ψ_j)`.
pub fn proxy_posterior(
    grid: &ParameterGrid,
    proxy: &(impl ProxyLikelihood + ?Sized),
) -> Result<(Vec<f64>, f64)> {
    let ll = proxy_log_likelihoods(grid, proxy)?;
    let mut logs: Vec<f64> = ll
        .iter()
        .zip(grid.psi_prior_mass())
        .map(|(l, m)| {
            if *m == 0.0 {
                f64::NEG_INFINITY
            } else {
                l + m.ln()
            }
        })
        .collect();
    let norm = normalize_log(&mut logs);
    if norm == f64::NEG_INFINITY {
        return Err(Error::DegenerateProxy);
    }
    Ok((logs.into_iter().map(f64::exp).collect(), norm))
}
