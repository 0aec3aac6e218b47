use super::proxy::{proxy_log_likelihoods, ProxyLikelihood};
use super::table::LikelihoodTable;
use crate::error::{Error, Result};
use crate::grid::ParameterGrid;
use crate::math::{log_sum_exp, normalize_log, tempered, LogSumExp};
use crate::model::{Model, Observation, SharedParam, TaskParam};
use crate::relevance::RelevanceWeights;

const SUM_TOLERANCE: f64 = 1e-10;

/// Normalized joint posterior over the `(θ, ψ)` grid, stored row-major with
/// θ as the row index.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorTable {
    grid: ParameterGrid,
    log_joint: Vec<f64>,
    joint_mass: Vec<f64>,
    log_evidence: f64,
}

impl PosteriorTable {
    /// Normalizes an unnormalized log joint; the log normalizer becomes the
    /// log evidence.
    pub fn from_log_joint(grid: ParameterGrid, mut log_joint: Vec<f64>) -> Result<Self> {
        if log_joint.len() != grid.theta_len() * grid.psi_len() {
            return Err(Error::Validation(
                "log joint does not match grid size".into(),
            ));
        }
        if let Some(index) = log_joint.iter().position(|v| v.is_nan()) {
            return Err(Error::Numerical(format!(
                "log joint is NaN at cell {index}"
            )));
        }
        let log_evidence = normalize_log(&mut log_joint);
        if !log_evidence.is_finite() {
            return Err(Error::EmptyPosterior);
        }
        let joint_mass: Vec<f64> = log_joint.iter().map(|v| v.exp()).collect();
        let total: f64 = joint_mass.iter().sum();
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::Numerical(format!("posterior sums to {total}")));
        }
        Ok(Self {
            grid,
            log_joint,
            joint_mass,
            log_evidence,
        })
    }

    pub fn grid(&self) -> &ParameterGrid {
        &self.grid
    }

    pub fn joint_mass(&self) -> &[f64] {
        &self.joint_mass
    }

    pub fn mass(&self, t: usize, p: usize) -> f64 {
        self.joint_mass[t * self.grid.psi_len() + p]
    }

    pub fn log_mass(&self, t: usize, p: usize) -> f64 {
        self.log_joint[t * self.grid.psi_len() + p]
    }

    pub fn log_evidence(&self) -> f64 {
        self.log_evidence
    }

    pub fn log_theta_marginal(&self) -> Vec<f64> {
        self.log_joint
            .chunks(self.grid.psi_len())
            .map(log_sum_exp)
            .collect()
    }

    pub fn theta_marginal(&self) -> Vec<f64> {
        self.joint_mass
            .chunks(self.grid.psi_len())
            .map(|r| r.iter().sum())
            .collect()
    }

    pub fn psi_marginal(&self) -> Vec<f64> {
        let np = self.grid.psi_len();
        let mut out = vec![0.0; np];
        for row in self.joint_mass.chunks(np) {
            for (o, m) in out.iter_mut().zip(row) {
                *o += m;
            }
        }
        out
    }
}

fn log_masses(masses: &[f64]) -> Vec<f64> {
    masses.iter().map(|m| m.ln()).collect()
}

fn check_mass_vector(masses: &[f64], len: usize, what: &str) -> Result<()> {
    if masses.len() != len {
        return Err(Error::Validation(format!(
            "{what} has length {}, expected {len}",
            masses.len()
        )));
    }
    let total: f64 = masses.iter().sum();
    if masses.iter().any(|m| !(m.is_finite() && *m >= 0.0)) || (total - 1.0).abs() > 1e-12 {
        return Err(Error::Validation(format!(
            "{what} is not a normalized mass vector"
        )));
    }
    Ok(())
}

/// Classic transfer posterior with each observation's task parameter
/// marginalized independently over `source_psi_prior`. The target ψ keeps
/// its grid prior.
pub fn classic_posterior(
    model: &dyn Model,
    data: &[Observation],
    grid: &ParameterGrid,
    source_psi_prior: &[f64],
) -> Result<PosteriorTable> {
    let table = LikelihoodTable::build(model, data, grid)?;
    classic_posterior_from_table(&table, grid, source_psi_prior, None)
}

/// Classic posterior from a precomputed table. With `groups`, observations
/// sharing a group id share one task parameter, marginalized jointly.
pub fn classic_posterior_from_table(
    table: &LikelihoodTable,
    grid: &ParameterGrid,
    source_psi_prior: &[f64],
    groups: Option<&[usize]>,
) -> Result<PosteriorTable> {
    table.check_grid(grid)?;
    check_mass_vector(source_psi_prior, grid.psi_len(), "source psi prior")?;
    let n = table.n_obs();
    let partition: Vec<Vec<usize>> = match groups {
        None => (0..n).map(|i| vec![i]).collect(),
        Some(g) => {
            if g.len() != n {
                return Err(Error::Validation(
                    "group labels must cover every observation".into(),
                ));
            }
            let count = g.iter().max().map_or(0, |m| m + 1);
            let mut parts = vec![Vec::new(); count];
            for (i, k) in g.iter().enumerate() {
                parts[*k].push(i);
            }
            parts.retain(|p| !p.is_empty());
            parts
        }
    };
    let log_src = log_masses(source_psi_prior);
    let log_theta_prior = log_masses(grid.theta_prior_mass());
    let mut log_theta = Vec::with_capacity(grid.theta_len());
    for t in 0..grid.theta_len() {
        let mut total = log_theta_prior[t];
        for part in &partition {
            let mut acc = LogSumExp::new();
            for (p, ls) in log_src.iter().enumerate() {
                if *ls == f64::NEG_INFINITY {
                    continue;
                }
                let row = table.row(t, p);
                acc.add(ls + part.iter().map(|&i| row[i]).sum::<f64>());
            }
            total += acc.value();
        }
        log_theta.push(total);
    }
    let log_psi = log_masses(grid.psi_prior_mass());
    let mut log_joint = Vec::with_capacity(grid.theta_len() * grid.psi_len());
    for lt in &log_theta {
        log_joint.extend(log_psi.iter().map(|lp| lt + lp));
    }
    PosteriorTable::from_log_joint(grid.clone(), log_joint)
}

fn check_weights(weights: &[f64], n: usize) -> Result<()> {
    if weights.len() != n {
        return Err(Error::Validation(format!(
            "expected {n} relevance weights, got {}",
            weights.len()
        )));
    }
    if let Some(w) = weights
        .iter()
        .find(|w| !(w.is_finite() && (0.0..=1.0).contains(*w)))
    {
        return Err(Error::Validation(format!(
            "relevance weight {w} outside [0, 1]"
        )));
    }
    Ok(())
}

/// `Σᵢ wᵢ · log p(dᵢ | θ, ψᵢ = ψ_target)`, with a zero weight contributing
/// nothing even for impossible observations.
pub fn r_weighted_likelihood(
    model: &dyn Model,
    data: &[Observation],
    theta: &SharedParam,
    psi_target: &TaskParam,
    weights: &[f64],
) -> Result<f64> {
    check_weights(weights, data.len())?;
    let ll = model.log_likelihood_batch(data, theta, psi_target)?;
    if let Some(index) = ll.iter().position(|v| v.is_nan()) {
        return Err(Error::NanLikelihood { index });
    }
    Ok(ll.iter().zip(weights).map(|(l, w)| tempered(*w, *l)).sum())
}

/// Relevance-weighted posterior over the grid: each ψ node uses its own
/// weight vector, and the proxy likelihood enters once per ψ node.
pub fn r_weighted_posterior(
    model: &dyn Model,
    data: &[Observation],
    grid: &ParameterGrid,
    weights_per_psi: &[RelevanceWeights],
    proxy: &(impl ProxyLikelihood + ?Sized),
) -> Result<PosteriorTable> {
    let table = LikelihoodTable::build(model, data, grid)?;
    let proxy_ll = proxy_log_likelihoods(grid, proxy)?;
    r_weighted_posterior_from_table(&table, grid, weights_per_psi, &proxy_ll)
}

pub fn r_weighted_posterior_from_table(
    table: &LikelihoodTable,
    grid: &ParameterGrid,
    weights_per_psi: &[RelevanceWeights],
    proxy_ll: &[f64],
) -> Result<PosteriorTable> {
    table.check_grid(grid)?;
    let np = grid.psi_len();
    if weights_per_psi.len() != np || proxy_ll.len() != np {
        return Err(Error::Validation(format!(
            "need one weight vector and one proxy value per psi node ({np})"
        )));
    }
    for (p, w) in weights_per_psi.iter().enumerate() {
        if w.psi_node_index.is_some_and(|k| k != p) {
            return Err(Error::Validation(format!(
                "weights for psi node {p} are labelled {:?}",
                w.psi_node_index
            )));
        }
        check_weights(&w.weights, table.n_obs())?;
    }
    if proxy_ll.iter().all(|v| *v == f64::NEG_INFINITY) {
        return Err(Error::DegenerateProxy);
    }
    let log_theta_prior = log_masses(grid.theta_prior_mass());
    let log_psi_prior = log_masses(grid.psi_prior_mass());
    let mut log_joint = Vec::with_capacity(grid.theta_len() * np);
    for (t, ltp) in log_theta_prior.iter().enumerate() {
        for p in 0..np {
            let base = ltp + log_psi_prior[p] + proxy_ll[p];
            if base == f64::NEG_INFINITY {
                log_joint.push(f64::NEG_INFINITY);
                continue;
            }
            let w = &weights_per_psi[p].weights;
            let ll: f64 = table
                .row(t, p)
                .iter()
                .zip(w)
                .map(|(l, w)| tempered(*w, *l))
                .sum();
            log_joint.push(base + ll);
        }
    }
    PosteriorTable::from_log_joint(grid.clone(), log_joint)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{point_mass, Prior};
    use crate::inference::ProxyObservation;
    use crate::model::linear_model;

    fn setup() -> (ParameterGrid, Vec<Observation>) {
        let grid = ParameterGrid::scalar(
            (-3.0, 3.0, 13, Prior::Normal { mean: 0.0, sd: 1.0 }),
            (-2.0, 2.0, 9, Prior::Normal { mean: 0.0, sd: 1.0 }),
        )
        .unwrap();
        let data = vec![
            Observation::real(vec![1.0, 0.5], 0.3),
            Observation::real(vec![-0.4, 1.2], -1.1),
            Observation::real(vec![0.8, -0.9], 2.0),
        ];
        (grid, data)
    }

    #[test]
    fn tables_sum_to_one() {
        let (grid, data) = setup();
        let m = linear_model();
        let post = classic_posterior(&m, &data, &grid, grid.psi_prior_mass()).unwrap();
        assert!((post.joint_mass().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let w = vec![RelevanceWeights::new(Some(0), vec![0.3, 1.0, 0.0]).unwrap(); 1];
        let weights: Vec<_> = (0..9)
            .map(|p| RelevanceWeights {
                psi_node_index: Some(p),
                ..w[0].clone()
            })
            .collect();
        let post = r_weighted_posterior(
            &m,
            &data,
            &grid,
            &weights,
            &ProxyObservation::uninformative(),
        )
        .unwrap();
        assert!((post.joint_mass().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_weights_give_prior() {
        let (grid, data) = setup();
        let weights: Vec<_> = (0..9)
            .map(|p| RelevanceWeights::new(Some(p), vec![0.0; 3]).unwrap())
            .collect();
        let post = r_weighted_posterior(
            &linear_model(),
            &data,
            &grid,
            &weights,
            &ProxyObservation::uninformative(),
        )
        .unwrap();
        for t in 0..grid.theta_len() {
            for p in 0..grid.psi_len() {
                let prior = grid.theta_prior_mass()[t] * grid.psi_prior_mass()[p];
                assert!((post.mass(t, p) - prior).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn unit_weights_and_point_mass_match_classic() {
        let (grid, data) = setup();
        let m = linear_model();
        let j = 6;
        let pinned = grid.with_psi_prior(point_mass(9, j)).unwrap();
        let classic = classic_posterior(&m, &data, &pinned, &point_mass(9, j)).unwrap();
        let weights: Vec<_> = (0..9)
            .map(|p| RelevanceWeights::new(Some(p), vec![1.0; 3]).unwrap())
            .collect();
        let proxy = ProxyObservation::one_hot(grid.psi_nodes()[j].clone());
        let rw = r_weighted_posterior(&m, &data, &pinned, &weights, &proxy).unwrap();
        for (a, b) in classic.theta_marginal().iter().zip(rw.theta_marginal()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn weight_half_is_square_root() {
        let m = linear_model();
        let d = vec![Observation::real(vec![1.0, 1.0], 0.7)];
        let (t, p) = (SharedParam::scalar(0.2), TaskParam::scalar(-0.1));
        let full = r_weighted_likelihood(&m, &d, &t, &p, &[1.0]).unwrap();
        let half = r_weighted_likelihood(&m, &d, &t, &p, &[0.5]).unwrap();
        assert!((half - 0.5 * full).abs() < 1e-15);
        assert_eq!(r_weighted_likelihood(&m, &d, &t, &p, &[0.0]).unwrap(), 0.0);
        assert!(matches!(
            r_weighted_likelihood(&m, &d, &t, &p, &[1.5]),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn constant_likelihood_leaves_theta_prior() {
        let grid = ParameterGrid::indexed(vec![0.2, 0.5, 0.3], vec![0.6, 0.4]).unwrap();
        let table =
            LikelihoodTable::from_fn(3, 2, 4, |_, p, _| if p == 0 { -1.0 } else { -2.0 }).unwrap();
        let post = classic_posterior_from_table(&table, &grid, &[0.5, 0.5], None).unwrap();
        for (a, b) in post.theta_marginal().iter().zip(grid.theta_prior_mass()) {
            assert!((a - b).abs() < 1e-15);
        }
        let single = ParameterGrid::indexed(vec![1.0], vec![1.0]).unwrap();
        let table = LikelihoodTable::from_fn(1, 1, 2, |_, _, i| -(i as f64)).unwrap();
        let post = classic_posterior_from_table(&table, &single, &[1.0], None).unwrap();
        assert_eq!(post.theta_marginal(), vec![1.0]);
    }

    #[test]
    fn known_groups_differ_from_independent() {
        let grid = ParameterGrid::indexed(vec![0.5, 0.5], vec![0.5, 0.5]).unwrap();
        let table =
            LikelihoodTable::from_fn(2, 2, 2, |t, p, _| if t == p { -0.1 } else { -2.0 }).unwrap();
        let src = [0.5, 0.5];
        let indep = classic_posterior_from_table(&table, &grid, &src, None).unwrap();
        let grouped = classic_posterior_from_table(&table, &grid, &src, Some(&[0, 0])).unwrap();
        let split = classic_posterior_from_table(&table, &grid, &src, Some(&[0, 1])).unwrap();
        assert_eq!(indep.theta_marginal(), split.theta_marginal());
        assert!((grouped.log_evidence() - indep.log_evidence()).abs() > 1e-3);
    }
}
