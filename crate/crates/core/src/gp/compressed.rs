use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::kernel::{gram, kernel_eval};
use super::linalg::{check_distinct, jittered_cholesky};
use super::{GpError, GpPosterior, GpPrior};
use crate::geometry::Point2;
use crate::quadtree::PseudoPointStats;

/// GP over aggregated pseudo-point statistics.
///
/// With `Z^-1 = k0(P,P) + sigma^2 diag(m)^-1`:
///
/// ```text
/// mu(x)    = mu0 + k0(x,P) Z (zeta - mu0)
/// k(x, x') = k0(x,x') - k0(x,P) Z k0(P,x')
/// ```
///
/// `Z^-1` is factored once, so one fit serves any number of queries.
#[derive(Debug, Clone)]
pub struct CompressedGp {
    prior: GpPrior,
    locs: Vec<Point2>,
    alpha: DVector<f64>,
    chol: Option<Cholesky<f64, Dyn>>,
}

impl CompressedGp {
    pub fn fit(stats: &[PseudoPointStats], prior: &GpPrior) -> Result<Self, GpError> {
        prior.validate()?;
        if stats.is_empty() {
            return Ok(Self { prior: *prior, locs: Vec::new(), alpha: DVector::zeros(0), chol: None });
        }
        if let Some(bad) = stats.iter().find(|s| !(s.m > 0.0)) {
            return Err(GpError::NonPositiveWeight(bad.m));
        }
        let locs: Vec<Point2> = stats.iter().map(|s| s.location).collect();
        check_distinct(&locs)?;
        let mut z_inv = gram(&prior.kernel, &locs, &locs);
        let s2 = prior.kernel.noise_variance();
        for (i, s) in stats.iter().enumerate() {
            z_inv[(i, i)] += s2 / s.m;
        }
        let chol = jittered_cholesky(z_inv)?;
        let resid = DVector::from_iterator(stats.len(), stats.iter().map(|s| s.zeta - prior.mean));
        let alpha = chol.solve(&resid);
        Ok(Self { prior: *prior, locs, alpha, chol: Some(chol) })
    }

    pub fn pseudo_point_count(&self) -> usize {
        self.locs.len()
    }

    pub fn predict_one(&self, x: &Point2) -> (f64, f64) {
        let Some(chol) = &self.chol else {
            return (self.prior.mean, self.prior.variance());
        };
        let kp = &self.prior.kernel;
        let kxp = DVector::from_iterator(self.locs.len(), self.locs.iter().map(|p| kernel_eval(x, p, kp)));
        let mean = self.prior.mean + kxp.dot(&self.alpha);
        let v = chol.l().solve_lower_triangular(&kxp).expect("cholesky factor is nonsingular");
        let var = (kernel_eval(x, x, kp) - v.norm_squared()).max(0.0);
        (mean, var + self.prior.noise_term())
    }

    pub fn predict(&self, query: &[Point2]) -> GpPosterior {
        let Some(chol) = &self.chol else {
            return GpPosterior::prior(&self.prior, query.len());
        };
        let kp = &self.prior.kernel;
        let kpq: DMatrix<f64> = gram(kp, &self.locs, query);
        let shift = kpq.tr_mul(&self.alpha);
        let v = chol.l().solve_lower_triangular(&kpq).expect("cholesky factor is nonsingular");
        let mut out = GpPosterior { mean: Vec::with_capacity(query.len()), variance: Vec::with_capacity(query.len()) };
        for (i, q) in query.iter().enumerate() {
            out.mean.push(self.prior.mean + shift[i]);
            let var = (kernel_eval(q, q, kp) - v.column(i).norm_squared()).max(0.0);
            out.variance.push(var + self.prior.noise_term());
        }
        out
    }
}

/// Posterior from pseudo-point statistics. Empty `stats` returns the prior.
pub fn compressed_gp_posterior(
    stats: &[PseudoPointStats],
    query: &[Point2],
    prior: &GpPrior,
) -> Result<GpPosterior, GpError> {
    Ok(CompressedGp::fit(stats, prior)?.predict(query))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::{exact_gp_posterior, KernelParams};
    use crate::tsdf::GridKey;

    fn prior() -> GpPrior {
        GpPrior::new(0.5, KernelParams::new(1.0, 0.1, 0.1))
    }

    fn stat(x: f64, y: f64, zeta: f64, m: f64) -> PseudoPointStats {
        PseudoPointStats { key: GridKey::new(0, 0), location: Point2::new(x, y), zeta, m }
    }

    #[test]
    fn empty_is_prior() {
        let q = [Point2::new(0.0, 0.0), Point2::new(5.0, 1.0)];
        let post = compressed_gp_posterior(&[], &q, &prior()).unwrap();
        assert_eq!(post, GpPosterior::prior(&prior(), 2));
    }

    #[test]
    fn single_unit_point_matches_exact() {
        let x0 = Point2::new(0.2, -0.1);
        let q = [x0, Point2::new(0.25, -0.05), Point2::new(1.0, 1.0)];
        let c = compressed_gp_posterior(&[stat(0.2, -0.1, 0.12, 1.0)], &q, &prior()).unwrap();
        let e = exact_gp_posterior(&[(x0, 0.12)], &q, &prior()).unwrap();
        for i in 0..q.len() {
            assert!((c.mean[i] - e.mean[i]).abs() < 1e-10);
            assert!((c.variance[i] - e.variance[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn repeated_observations_average() {
        let x0 = Point2::new(0.0, 0.0);
        let ys = [0.1, 0.3, -0.2, 0.25];
        let mean = ys.iter().sum::<f64>() / 4.0;
        let q = [x0, Point2::new(0.07, 0.0), Point2::new(-0.1, 0.2)];
        let c = compressed_gp_posterior(&[stat(0.0, 0.0, mean, 4.0)], &q, &prior()).unwrap();
        let raw: Vec<_> = ys.iter().map(|y| (x0, *y)).collect();
        let e = exact_gp_posterior(&raw, &q, &prior()).unwrap();
        for i in 0..q.len() {
            assert!((c.mean[i] - e.mean[i]).abs() < 1e-8);
            assert!((c.variance[i] - e.variance[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn predict_one_agrees_with_batch() {
        let stats = [stat(0.0, 0.0, 0.1, 2.0), stat(0.1, 0.0, -0.1, 1.0), stat(0.0, 0.1, 0.3, 0.5)];
        let gp = CompressedGp::fit(&stats, &prior()).unwrap();
        let q = [Point2::new(0.05, 0.02), Point2::new(-0.3, 0.4)];
        let batch = gp.predict(&q);
        for (i, x) in q.iter().enumerate() {
            let (m, v) = gp.predict_one(x);
            assert!((m - batch.mean[i]).abs() < 1e-14);
            assert!((v - batch.variance[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_zero_weight_and_duplicates() {
        let q = [Point2::new(0.0, 0.0)];
        assert_eq!(
            compressed_gp_posterior(&[stat(0.0, 0.0, 0.1, 0.0)], &q, &prior()).unwrap_err(),
            GpError::NonPositiveWeight(0.0)
        );
        let dup = [stat(0.0, 0.0, 0.1, 1.0), stat(0.0, 0.0, 0.2, 1.0)];
        assert!(matches!(compressed_gp_posterior(&dup, &q, &prior()), Err(GpError::NumericalFailure(2, _))));
    }
}
