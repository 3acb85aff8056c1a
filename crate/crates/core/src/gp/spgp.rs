//! Pseudo-input GP through its weighting factors and information form.
//!
//! This is the long way round to the same posterior the compressed
//! statistics give; it exists so tests can check the runtime path against
//! an independently assembled derivation.

use nalgebra::{DMatrix, DVector};

use super::kernel::{gram, kernel_eval};
use super::linalg::{check_distinct, jittered_cholesky, symmetrize};
use super::{GpError, GpPosterior, GpPrior};
use crate::geometry::Point2;

/// Intermediates of the pseudo-target posterior.
#[derive(Debug, Clone)]
pub struct SpgpDerivation {
    pub pseudo_locs: Vec<Point2>,
    /// `k0(P,X) (Lambda + sigma^2 I)^-1 k0(X,P)`
    pub gamma_matrix: DMatrix<f64>,
    /// `k0(X,X) - k0(X,P) k0(P,P)^-1 k0(P,X)`
    pub lambda: DMatrix<f64>,
    /// `k0(P,X) (Lambda + sigma^2 I)^-1 (y - mu0)`
    pub gamma_vector: DVector<f64>,
    /// information mean
    pub info_mean: DVector<f64>,
    /// information matrix
    pub info_matrix: DMatrix<f64>,
    kpp_inv: DMatrix<f64>,
    prior: GpPrior,
}

pub fn spgp_derivation(
    train: &[(Point2, f64)],
    pseudo_locs: &[Point2],
    prior: &GpPrior,
) -> Result<SpgpDerivation, GpError> {
    prior.validate()?;
    if pseudo_locs.is_empty() {
        return Err(GpError::NoPseudoPoints);
    }
    check_distinct(pseudo_locs)?;
    let kp = &prior.kernel;
    let m = pseudo_locs.len();
    let xs: Vec<Point2> = train.iter().map(|(p, _)| *p).collect();
    let n = xs.len();

    let kpp = gram(kp, pseudo_locs, pseudo_locs);
    let kpp_inv = jittered_cholesky(kpp.clone())?.inverse();
    let kpx = gram(kp, pseudo_locs, &xs);
    let kxx = gram(kp, &xs, &xs);

    let mut lambda = &kxx - kpx.transpose() * &kpp_inv * &kpx;
    symmetrize(&mut lambda);

    let (gamma_matrix, gamma_vector) = if n == 0 {
        (DMatrix::zeros(m, m), DVector::zeros(m))
    } else {
        let mut a = lambda.clone();
        for i in 0..n {
            a[(i, i)] += kp.noise_variance();
        }
        let a_chol = jittered_cholesky(a)?;
        let resid = DVector::from_iterator(n, train.iter().map(|(_, y)| y - prior.mean));
        let a_inv_kxp = a_chol.solve(&kpx.transpose());
        let mut g = &kpx * a_inv_kxp;
        symmetrize(&mut g);
        (g, &kpx * a_chol.solve(&resid))
    };

    let mut info_matrix = &kpp_inv * (&kpp + &gamma_matrix) * &kpp_inv;
    symmetrize(&mut info_matrix);
    let info_mean = &info_matrix * DVector::from_element(m, prior.mean) + &kpp_inv * &gamma_vector;

    Ok(SpgpDerivation {
        pseudo_locs: pseudo_locs.to_vec(),
        gamma_matrix,
        lambda,
        gamma_vector,
        info_mean,
        info_matrix,
        kpp_inv,
        prior: *prior,
    })
}

impl SpgpDerivation {
    /// Posterior mean and covariance of the pseudo-targets.
    pub fn pseudo_target_posterior(&self) -> Result<(DVector<f64>, DMatrix<f64>), GpError> {
        let chol = jittered_cholesky(self.info_matrix.clone())?;
        let cov = chol.inverse();
        let mean = chol.solve(&self.info_mean);
        Ok((mean, cov))
    }

    /// Predictive distribution after integrating out the pseudo-targets.
    pub fn predict(&self, query: &[Point2]) -> Result<GpPosterior, GpError> {
        let kp = &self.prior.kernel;
        let (target_mean, target_cov) = self.pseudo_target_posterior()?;
        let m = self.pseudo_locs.len();
        let centered = target_mean - DVector::from_element(m, self.prior.mean);
        let kqp = gram(kp, query, &self.pseudo_locs);
        // rows: k0(x,P) k0(P,P)^-1
        let proj = &kqp * &self.kpp_inv;
        let mut out = GpPosterior::default();
        for (i, q) in query.iter().enumerate() {
            let row = proj.row(i);
            out.mean.push(self.prior.mean + (row * &centered)[0]);
            let explained = (row * &target_cov * row.transpose())[0];
            let projected = (row * kqp.row(i).transpose())[0];
            let var = (explained + kernel_eval(q, q, kp) - projected).max(0.0);
            out.variance.push(var + self.prior.noise_term());
        }
        Ok(out)
    }
}

/// Pseudo-input GP predictive distribution, assembled from the derivation.
pub fn spgp_posterior_reference(
    train: &[(Point2, f64)],
    pseudo_locs: &[Point2],
    query: &[Point2],
    prior: &GpPrior,
) -> Result<GpPosterior, GpError> {
    spgp_derivation(train, pseudo_locs, prior)?.predict(query)
}
