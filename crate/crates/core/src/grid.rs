//! Discretized parameter domains with prior mass per node.

use crate::error::{Error, Result};
use crate::math::{gamma_log_pdf, lognormal_log_pdf, normal_log_pdf, normalize_log};
use crate::model::{SharedParam, TaskParam};

const MASS_TOLERANCE: f64 = 1e-12;

/// Prior density of one scalar parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Prior {
    Uniform,
    Normal { mean: f64, sd: f64 },
    LogNormal { mu: f64, sigma: f64 },
    Gamma { shape: f64, scale: f64 },
}

impl Prior {
    /// Log density up to a constant that does not depend on `x`.
    pub fn log_density(&self, x: f64) -> f64 {
        match *self {
            Prior::Uniform => 0.0,
            Prior::Normal { mean, sd } => normal_log_pdf(x, mean, sd),
            Prior::LogNormal { mu, sigma } => lognormal_log_pdf(x, mu, sigma),
            Prior::Gamma { shape, scale } => gamma_log_pdf(x, shape, scale),
        }
    }
}

/// Uniformly spaced nodes on `[lo, hi]`, endpoints included.
#[derive(Debug, Clone, PartialEq)]
pub struct GridAxis {
    nodes: Vec<f64>,
}

impl GridAxis {
    pub fn uniform(lo: f64, hi: f64, resolution: usize) -> Result<Self> {
        if resolution == 0 || !(lo.is_finite() && hi.is_finite()) || hi < lo {
            return Err(Error::Validation(format!(
                "invalid grid axis [{lo}, {hi}] x {resolution}"
            )));
        }
        if resolution == 1 {
            return Ok(Self {
                nodes: vec![0.5 * (lo + hi)],
            });
        }
        let h = (hi - lo) / (resolution - 1) as f64;
        let nodes = (0..resolution)
            .map(|k| {
                if k == resolution - 1 {
                    hi
                } else {
                    lo + k as f64 * h
                }
            })
            .collect();
        Ok(Self { nodes })
    }

    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.is_empty() || nodes.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation(
                "axis nodes must be nonempty and finite".into(),
            ));
        }
        Ok(Self { nodes })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Prior mass per node by the midpoint rule. On a uniform axis the cell
    /// widths cancel in the normalization.
    pub fn masses(&self, prior: Prior) -> Result<Vec<f64>> {
        let mut logs: Vec<f64> = self.nodes.iter().map(|x| prior.log_density(*x)).collect();
        let norm = normalize_log(&mut logs);
        if !norm.is_finite() {
            return Err(Error::Validation(format!(
                "prior {prior:?} has no mass on the axis"
            )));
        }
        Ok(logs.into_iter().map(f64::exp).collect())
    }
}

/// Cartesian product of axes, each with its own prior. Returns node
/// coordinates (last axis fastest) and product masses.
fn product(axes: &[(GridAxis, Prior)]) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let mut nodes = vec![Vec::new()];
    let mut masses = vec![1.0];
    for (axis, prior) in axes {
        let axis_mass = axis.masses(*prior)?;
        let mut next_nodes = Vec::with_capacity(nodes.len() * axis.len());
        let mut next_masses = Vec::with_capacity(nodes.len() * axis.len());
        for (node, mass) in nodes.iter().zip(&masses) {
            for (x, m) in axis.nodes().iter().zip(&axis_mass) {
                let mut n = node.clone();
                n.push(*x);
                next_nodes.push(n);
                next_masses.push(mass * m);
            }
        }
        nodes = next_nodes;
        masses = next_masses;
    }
    Ok((nodes, masses))
}

fn check_masses(masses: &[f64], what: &str) -> Result<()> {
    if masses.is_empty() {
        return Err(Error::Validation(format!("{what} has no nodes")));
    }
    if masses.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
        return Err(Error::Validation(format!(
            "{what} masses must be finite and nonnegative"
        )));
    }
    // Summation error grows with the node count.
    let total: f64 = masses.iter().sum();
    if (total - 1.0).abs() > MASS_TOLERANCE + masses.len() as f64 * f64::EPSILON {
        return Err(Error::Validation(format!(
            "{what} masses sum to {total}, not 1"
        )));
    }
    Ok(())
}

/// Joint grid over `(θ, ψ)` with independent prior masses.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterGrid {
    theta_nodes: Vec<SharedParam>,
    psi_nodes: Vec<TaskParam>,
    theta_prior_mass: Vec<f64>,
    psi_prior_mass: Vec<f64>,
}

impl ParameterGrid {
    pub fn new(
        theta_nodes: Vec<SharedParam>,
        theta_prior_mass: Vec<f64>,
        psi_nodes: Vec<TaskParam>,
        psi_prior_mass: Vec<f64>,
    ) -> Result<Self> {
        if theta_nodes.len() != theta_prior_mass.len() || psi_nodes.len() != psi_prior_mass.len() {
            return Err(Error::Validation(
                "grid node and mass lengths differ".into(),
            ));
        }
        check_masses(&theta_prior_mass, "theta prior")?;
        check_masses(&psi_prior_mass, "psi prior")?;
        Ok(Self {
            theta_nodes,
            psi_nodes,
            theta_prior_mass,
            psi_prior_mass,
        })
    }

    pub fn from_axes(
        theta_axes: &[(GridAxis, Prior)],
        psi_axes: &[(GridAxis, Prior)],
    ) -> Result<Self> {
        let (tn, tm) = product(theta_axes)?;
        let (pn, pm) = product(psi_axes)?;
        Self::new(
            tn.into_iter()
                .map(SharedParam::new)
                .collect::<Result<_>>()?,
            tm,
            pn.into_iter().map(TaskParam::new).collect::<Result<_>>()?,
            pm,
        )
    }

    /// Scalar `θ` and `ψ` on uniform axes.
    pub fn scalar(theta: (f64, f64, usize, Prior), psi: (f64, f64, usize, Prior)) -> Result<Self> {
        Self::from_axes(
            &[(GridAxis::uniform(theta.0, theta.1, theta.2)?, theta.3)],
            &[(GridAxis::uniform(psi.0, psi.1, psi.2)?, psi.3)],
        )
    }

    /// Index grid for categorical models: node `k` has value `k`.
    pub fn indexed(theta_prior_mass: Vec<f64>, psi_prior_mass: Vec<f64>) -> Result<Self> {
        let tn = (0..theta_prior_mass.len())
            .map(|k| SharedParam::scalar(k as f64))
            .collect();
        let pn = (0..psi_prior_mass.len())
            .map(|k| TaskParam::scalar(k as f64))
            .collect();
        Self::new(tn, theta_prior_mass, pn, psi_prior_mass)
    }

    pub fn theta_nodes(&self) -> &[SharedParam] {
        &self.theta_nodes
    }

    pub fn psi_nodes(&self) -> &[TaskParam] {
        &self.psi_nodes
    }

    pub fn theta_prior_mass(&self) -> &[f64] {
        &self.theta_prior_mass
    }

    pub fn psi_prior_mass(&self) -> &[f64] {
        &self.psi_prior_mass
    }

    pub fn theta_len(&self) -> usize {
        self.theta_nodes.len()
    }

    pub fn psi_len(&self) -> usize {
        self.psi_nodes.len()
    }

    /// Same nodes with a different ψ prior.
    pub fn with_psi_prior(&self, psi_prior_mass: Vec<f64>) -> Result<Self> {
        Self::new(
            self.theta_nodes.clone(),
            self.theta_prior_mass.clone(),
            self.psi_nodes.clone(),
            psi_prior_mass,
        )
    }

    pub fn with_theta_prior(&self, theta_prior_mass: Vec<f64>) -> Result<Self> {
        Self::new(
            self.theta_nodes.clone(),
            theta_prior_mass,
            self.psi_nodes.clone(),
            self.psi_prior_mass.clone(),
        )
    }

    /// Nearest θ node to `value` and its Euclidean distance. Points outside
    /// the nodes' bounding box are rejected.
    pub fn nearest_theta(&self, value: &[f64]) -> Result<(usize, f64)> {
        nearest(self.theta_nodes.iter().map(|n| n.values()), value)
    }

    pub fn nearest_psi(&self, value: &[f64]) -> Result<(usize, f64)> {
        nearest(self.psi_nodes.iter().map(|n| n.values()), value)
    }
}

/// One-hot mass vector of length `len` at `index`.
pub fn point_mass(len: usize, index: usize) -> Vec<f64> {
    let mut m = vec![0.0; len];
    m[index] = 1.0;
    m
}

fn nearest<'a>(
    nodes: impl Iterator<Item = &'a [f64]> + Clone,
    value: &[f64],
) -> Result<(usize, f64)> {
    let dim = value.len();
    for d in 0..dim {
        let (lo, hi) = nodes
            .clone()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), n| {
                (lo.min(n[d]), hi.max(n[d]))
            });
        if !(value[d] >= lo - 1e-12 && value[d] <= hi + 1e-12) {
            return Err(Error::OutsideGrid(value.to_vec()));
        }
    }
    let mut best = (0, f64::INFINITY);
    for (k, n) in nodes.enumerate() {
        if n.len() != dim {
            return Err(Error::Validation(
                "parameter dimension does not match the grid".into(),
            ));
        }
        let dist = n
            .iter()
            .zip(value)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        if dist < best.1 {
            best = (k, dist);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_includes_endpoints() {
        let a = GridAxis::uniform(-10.0, 10.0, 201).unwrap();
        assert_eq!(a.nodes()[0], -10.0);
        assert_eq!(a.nodes()[200], 10.0);
        assert!((a.nodes()[90] + 1.0).abs() < 1e-12);
        let b = GridAxis::uniform(-10.0, 10.0, 101).unwrap();
        assert!((b.nodes()[45] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn masses_normalize() {
        let g = ParameterGrid::scalar(
            (-10.0, 10.0, 101, Prior::Normal { mean: 0.0, sd: 1.0 }),
            (
                0.05,
                12.0,
                37,
                Prior::Gamma {
                    shape: 3.0,
                    scale: 0.8,
                },
            ),
        )
        .unwrap();
        assert!((g.theta_prior_mass().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((g.psi_prior_mass().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn product_axes() {
        let ax = GridAxis::uniform(0.0, 1.0, 3).unwrap();
        let g = ParameterGrid::from_axes(
            &[(ax.clone(), Prior::Uniform), (ax.clone(), Prior::Uniform)],
            &[(ax, Prior::Uniform)],
        )
        .unwrap();
        assert_eq!(g.theta_len(), 9);
        assert_eq!(g.theta_nodes()[5].values(), &[0.5, 1.0]);
        assert!((g.theta_prior_mass()[4] - 1.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn nearest_snaps_and_rejects_outside() {
        let g = ParameterGrid::scalar(
            (-1.0, 1.0, 5, Prior::Uniform),
            (0.0, 1.0, 2, Prior::Uniform),
        )
        .unwrap();
        let (k, d) = g.nearest_theta(&[0.4]).unwrap();
        assert_eq!(k, 3);
        assert!((d - 0.1).abs() < 1e-12);
        assert!(matches!(
            g.nearest_theta(&[1.5]),
            Err(Error::OutsideGrid(_))
        ));
    }

    #[test]
    fn rejects_unnormalized_mass() {
        assert!(ParameterGrid::indexed(vec![0.5, 0.6], vec![1.0]).is_err());
        assert!(ParameterGrid::indexed(vec![], vec![1.0]).is_err());
    }
}
