use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use super::{Design, IntervalBox, Model, Observation, Outcome, SharedParam, TaskParam};
use crate::error::{Error, Result};
use crate::math::HALF_LN_2PI;

pub const GP_BASE_JITTER: f64 = 1e-8;
pub const GP_MAX_JITTER: f64 = 1e-4;

/// Zero-mean Gaussian process observed noiselessly on a fixed input grid.
/// One observation is one whole trajectory.
///
/// The kernel is the average of two unit-amplitude RBF kernels with
/// lengthscales `θ` (shared) and `ψ` (task), so `k(x, x) = 1`.
#[derive(Debug, Clone)]
pub struct GpModel {
    x_grid: Vec<f64>,
    theta_support: IntervalBox,
    psi_support: IntervalBox,
}

/// Cholesky factor of a kernel matrix together with the jitter that made it
/// positive definite.
#[derive(Debug, Clone)]
pub struct GpFactor {
    pub cholesky: Cholesky<f64, Dyn>,
    pub jitter: f64,
    pub log_det: f64,
}

pub fn gp_model(x_grid: Vec<f64>) -> Result<GpModel> {
    if x_grid.len() < 2 {
        return Err(Error::Validation(
            "GP input grid needs at least two points".into(),
        ));
    }
    if x_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Validation(
            "GP input grid must be strictly increasing".into(),
        ));
    }
    Ok(GpModel {
        x_grid,
        theta_support: IntervalBox::cube(1, 0.05, 12.0),
        psi_support: IntervalBox::cube(1, 0.05, 12.0),
    })
}

fn rbf(dx: f64, lengthscale: f64) -> f64 {
    (-dx * dx / (2.0 * lengthscale * lengthscale)).exp()
}

impl GpModel {
    pub fn x_grid(&self) -> &[f64] {
        &self.x_grid
    }

    pub fn len(&self) -> usize {
        self.x_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x_grid.is_empty()
    }

    /// Kernel matrix without jitter.
    pub fn kernel_matrix(&self, theta: f64, psi: f64) -> DMatrix<f64> {
        let m = self.x_grid.len();
        DMatrix::from_fn(m, m, |a, b| {
            let dx = self.x_grid[a] - self.x_grid[b];
            0.5 * (rbf(dx, theta) + rbf(dx, psi))
        })
    }

    /// Factors `K + jitter·I`, starting at [`GP_BASE_JITTER`] and escalating
    /// tenfold up to [`GP_MAX_JITTER`].
    pub fn factor(&self, theta: &SharedParam, psi: &TaskParam) -> Result<GpFactor> {
        self.check_params(theta, psi)?;
        self.factor_matrix(self.kernel_matrix(theta[0], psi[0])).map_err(|_| {
            Error::Numerical(format!(
                "GP kernel not positive definite at theta={}, psi={} even with jitter {GP_MAX_JITTER}",
                theta[0], psi[0]
            ))
        })
    }

    /// Factors `base + jitter·I` with the same jitter schedule as [`GpModel::factor`].
    pub fn factor_matrix(&self, base: DMatrix<f64>) -> Result<GpFactor> {
        let mut jitter = GP_BASE_JITTER;
        while jitter <= GP_MAX_JITTER * (1.0 + 1e-9) {
            let mut k = base.clone();
            for i in 0..k.nrows() {
                k[(i, i)] += jitter;
            }
            if let Some(chol) = Cholesky::new(k) {
                let diag = chol.l_dirty().diagonal();
                if diag.iter().all(|d| *d > 0.0 && d.is_finite()) {
                    let log_det = 2.0 * diag.iter().map(|d| d.ln()).sum::<f64>();
                    return Ok(GpFactor {
                        cholesky: chol,
                        jitter,
                        log_det,
                    });
                }
            }
            jitter *= 10.0;
        }
        Err(Error::Numerical(format!(
            "matrix not positive definite even with jitter {GP_MAX_JITTER}"
        )))
    }

    fn trajectory<'a>(&self, obs: &'a Observation) -> Result<&'a [f64]> {
        let y = obs.outcome.as_vector().ok_or_else(|| {
            Error::InvalidObservation("GP model expects a trajectory outcome".into())
        })?;
        if y.len() != self.x_grid.len() {
            return Err(Error::InvalidObservation(format!(
                "trajectory has {} points, grid has {}",
                y.len(),
                self.x_grid.len()
            )));
        }
        Ok(y)
    }

    fn log_density(&self, factor: &GpFactor, y: &[f64]) -> f64 {
        let m = y.len() as f64;
        let v = DVector::from_column_slice(y);
        let alpha = factor.cholesky.solve(&v);
        -m * HALF_LN_2PI - 0.5 * factor.log_det - 0.5 * v.dot(&alpha)
    }
}

impl Model for GpModel {
    fn name(&self) -> &str {
        "gp-composite"
    }

    fn covariate_dim(&self) -> usize {
        0
    }

    fn theta_support(&self) -> &IntervalBox {
        &self.theta_support
    }

    fn psi_support(&self) -> &IntervalBox {
        &self.psi_support
    }

    fn log_likelihood(
        &self,
        obs: &Observation,
        theta: &SharedParam,
        psi: &TaskParam,
    ) -> Result<f64> {
        let y = self.trajectory(obs)?;
        let factor = self.factor(theta, psi)?;
        Ok(self.log_density(&factor, y))
    }

    fn log_likelihood_batch(
        &self,
        data: &[Observation],
        theta: &SharedParam,
        psi: &TaskParam,
    ) -> Result<Vec<f64>> {
        let factor = self.factor(theta, psi)?;
        data.iter()
            .map(|obs| Ok(self.log_density(&factor, self.trajectory(obs)?)))
            .collect()
    }

    fn simulate(
        &self,
        design: &Design,
        theta: &SharedParam,
        psi: &TaskParam,
        rng: &mut dyn RngCore,
    ) -> Result<Observation> {
        let factor = self.factor(theta, psi)?;
        let m = self.x_grid.len();
        let eps = DVector::from_iterator(m, (0..m).map(|_| StandardNormal.sample(rng)));
        let y = factor.cholesky.l() * eps;
        Ok(Observation::new(
            design.clone(),
            Outcome::Vector(y.iter().copied().collect()),
        ))
    }

    /// The zero-mean mixture's covariance is the weighted average kernel.
    fn log_matched_mode_density(
        &self,
        _design: &Design,
        thetas: &[SharedParam],
        weights: &[f64],
        psi: &TaskParam,
    ) -> Result<f64> {
        let total: f64 = weights.iter().sum();
        let m = self.x_grid.len();
        let mut cov = DMatrix::zeros(m, m);
        for (theta, w) in thetas.iter().zip(weights) {
            if *w == 0.0 {
                continue;
            }
            self.check_params(theta, psi)?;
            cov += self.kernel_matrix(theta[0], psi[0]) * (w / total);
        }
        let log_det = self.factor_matrix(cov)?.log_det;
        Ok(-(m as f64) * HALF_LN_2PI - 0.5 * log_det)
    }

    fn log_mode_density(
        &self,
        _design: &Design,
        theta: &SharedParam,
        psi: &TaskParam,
    ) -> Result<f64> {
        let factor = self.factor(theta, psi)?;
        Ok(-(self.x_grid.len() as f64) * HALF_LN_2PI - 0.5 * factor.log_det)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(m: usize) -> Vec<f64> {
        (0..m).map(|i| i as f64 / (m - 1) as f64).collect()
    }

    #[test]
    fn unit_amplitude_kernel() {
        let gp = gp_model(grid(6)).unwrap();
        let k = gp.kernel_matrix(0.7, 2.0);
        for a in 0..6 {
            assert_eq!(k[(a, a)], 1.0);
            for b in 0..6 {
                assert!(k[(a, b)] <= 1.0);
                assert_eq!(k[(a, b)], k[(b, a)]);
            }
        }
    }

    #[test]
    fn equal_lengthscales_give_single_rbf() {
        let xs = grid(5);
        let gp = gp_model(xs.clone()).unwrap();
        let k = gp.kernel_matrix(0.4, 0.4);
        for a in 0..5 {
            for b in 0..5 {
                let single = rbf(xs[a] - xs[b], 0.4);
                assert!((k[(a, b)] - single).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn rejects_bad_grid_and_lengthscale() {
        assert!(gp_model(vec![0.0]).is_err());
        assert!(gp_model(vec![0.0, 0.5, 0.5]).is_err());
        let gp = gp_model(grid(4)).unwrap();
        let err = gp
            .factor(&SharedParam::scalar(-1.0), &TaskParam::scalar(1.0))
            .unwrap_err();
        assert!(matches!(err, Error::Support(_)));
    }

    #[test]
    fn factors_across_support_corners() {
        let gp = gp_model(grid(10)).unwrap();
        let f = gp
            .factor(&SharedParam::scalar(12.0), &TaskParam::scalar(12.0))
            .unwrap();
        assert!(f.jitter >= GP_BASE_JITTER && f.jitter <= GP_MAX_JITTER);
        let rough = gp
            .factor(&SharedParam::scalar(0.05), &TaskParam::scalar(0.05))
            .unwrap();
        assert_eq!(rough.jitter, GP_BASE_JITTER);
    }
}
