use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::kernel::{gram, kernel_eval};
use super::linalg::jittered_cholesky;
use super::{GpError, GpPosterior, GpPrior};
use crate::geometry::Point2;

/// Full GP conditioned on raw observations.
#[derive(Debug, Clone)]
pub struct ExactGp {
    prior: GpPrior,
    inputs: Vec<Point2>,
    // (K + sigma^2 I)^-1 (y - mu0), and the factor of K + sigma^2 I
    alpha: DVector<f64>,
    chol: Option<Cholesky<f64, Dyn>>,
}

impl ExactGp {
    pub fn fit(train: &[(Point2, f64)], prior: &GpPrior) -> Result<Self, GpError> {
        prior.validate()?;
        let inputs: Vec<Point2> = train.iter().map(|(p, _)| *p).collect();
        if inputs.is_empty() {
            return Ok(Self { prior: *prior, inputs, alpha: DVector::zeros(0), chol: None });
        }
        let mut k = gram(&prior.kernel, &inputs, &inputs);
        let s2 = prior.kernel.noise_variance();
        for i in 0..k.nrows() {
            k[(i, i)] += s2;
        }
        let chol = jittered_cholesky(k)?;
        let resid = DVector::from_iterator(train.len(), train.iter().map(|(_, y)| y - prior.mean));
        let alpha = chol.solve(&resid);
        Ok(Self { prior: *prior, inputs, alpha, chol: Some(chol) })
    }

    pub fn predict(&self, query: &[Point2]) -> GpPosterior {
        let Some(chol) = &self.chol else {
            return GpPosterior::prior(&self.prior, query.len());
        };
        let kp = &self.prior.kernel;
        let kqx: DMatrix<f64> = gram(kp, query, &self.inputs);
        let mean_shift = &kqx * &self.alpha;
        // v = L^-1 k(X, q); k(q,q) - v^T v
        let v = chol.l().solve_lower_triangular(&kqx.transpose()).expect("cholesky factor is nonsingular");
        let mut out = GpPosterior { mean: Vec::with_capacity(query.len()), variance: Vec::with_capacity(query.len()) };
        for (i, q) in query.iter().enumerate() {
            out.mean.push(self.prior.mean + mean_shift[i]);
            let reduction = v.column(i).norm_squared();
            let var = (kernel_eval(q, q, kp) - reduction).max(0.0);
            out.variance.push(var + self.prior.noise_term());
        }
        out
    }
}

/// GP posterior from raw training pairs. Empty `train` returns the prior.
pub fn exact_gp_posterior(train: &[(Point2, f64)], query: &[Point2], prior: &GpPrior) -> Result<GpPosterior, GpError> {
    Ok(ExactGp::fit(train, prior)?.predict(query))
}
