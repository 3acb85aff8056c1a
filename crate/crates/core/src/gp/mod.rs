//! Gaussian Process machinery for TSDF regression.
//!
//! Three posteriors live here:
//!
//! - [`exact_gp_posterior`]: full conditioning on raw `(x, y)` pairs, cubic in
//!   the number of observations.
//! - [`spgp_posterior_reference`]: the pseudo-input derivation through the
//!   weighting factors and the information form. Slow and only used as a
//!   test oracle.
//! - [`compressed_gp_posterior`]: the runtime path. Pseudo-points carry an
//!   averaged target `zeta` and an observation weight `m`, and the posterior is
//!   computed from those aggregates alone.
//!
//! Variances are latent (`k(x, x)`) unless the prior enables observation
//! noise, in which case `sigma^2` is added to every predictive variance.

mod compressed;
mod exact;
mod kernel;
pub(crate) mod linalg;
mod spgp;

pub use compressed::{compressed_gp_posterior, CompressedGp};
pub use exact::{exact_gp_posterior, ExactGp};
pub use kernel::{gram, kernel_eval, KernelParams};
pub use spgp::{spgp_derivation, spgp_posterior_reference, SpgpDerivation};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GpError {
    #[error("invalid kernel parameters: {0}")]
    InvalidParams(String),
    #[error("{0}x{0} system is not positive definite even with jitter {1:e}")]
    NumericalFailure(usize, f64),
    #[error("pseudo-point set is empty")]
    NoPseudoPoints,
    #[error("pseudo-point observation weight must be positive, got {0}")]
    NonPositiveWeight(f64),
}

/// Constant-mean GP prior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpPrior {
    pub mean: f64,
    pub kernel: KernelParams,
    /// Add `sigma^2` to predictive variances.
    #[serde(default)]
    pub observation_noise: bool,
}

impl GpPrior {
    pub fn new(mean: f64, kernel: KernelParams) -> Self {
        Self { mean, kernel, observation_noise: false }
    }

    pub fn with_observation_noise(mut self, on: bool) -> Self {
        self.observation_noise = on;
        self
    }

    /// Prior variance reported at any point, honoring the noise flag.
    pub fn variance(&self) -> f64 {
        self.kernel.signal_variance() + self.noise_term()
    }

    pub(crate) fn noise_term(&self) -> f64 {
        if self.observation_noise {
            self.kernel.noise_variance()
        } else {
            0.0
        }
    }

    pub fn validate(&self) -> Result<(), GpError> {
        if !self.mean.is_finite() {
            return Err(GpError::InvalidParams(format!("prior mean {} is not finite", self.mean)));
        }
        self.kernel.validate()
    }
}

/// Mean and variance at each query point.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GpPosterior {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

impl GpPosterior {
    pub fn prior(prior: &GpPrior, len: usize) -> Self {
        Self { mean: vec![prior.mean; len], variance: vec![prior.variance(); len] }
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }
}
