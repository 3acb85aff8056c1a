use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::GpError;
use crate::geometry::Point2;

/// Squared-exponential kernel `c^2 exp(-|a-b|^2 / (2 l^2))` plus the
/// observation noise standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelParams {
    /// `c`
    pub signal_amplitude: f64,
    /// `l`, meters
    pub length_scale: f64,
    /// `sigma`, meters
    pub noise_std: f64,
}

impl KernelParams {
    pub fn new(signal_amplitude: f64, length_scale: f64, noise_std: f64) -> Self {
        Self { signal_amplitude, length_scale, noise_std }
    }

    pub fn signal_variance(&self) -> f64 {
        self.signal_amplitude * self.signal_amplitude
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_std * self.noise_std
    }

    pub fn validate(&self) -> Result<(), GpError> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(self.signal_amplitude) {
            return Err(GpError::InvalidParams(format!("signal_amplitude must be > 0, got {}", self.signal_amplitude)));
        }
        if !ok(self.length_scale) {
            return Err(GpError::InvalidParams(format!("length_scale must be > 0, got {}", self.length_scale)));
        }
        if !ok(self.noise_std) {
            return Err(GpError::InvalidParams(format!("noise_std must be > 0, got {}", self.noise_std)));
        }
        Ok(())
    }
}

#[inline]
pub fn kernel_eval(a: &Point2, b: &Point2, kp: &KernelParams) -> f64 {
    let l2 = kp.length_scale * kp.length_scale;
    kp.signal_variance() * (-a.distance_squared(b) / (2.0 * l2)).exp()
}

/// Cross-covariance matrix `k0(a, b)`.
pub fn gram(kp: &KernelParams, a: &[Point2], b: &[Point2]) -> DMatrix<f64> {
    DMatrix::from_fn(a.len(), b.len(), |i, j| kernel_eval(&a[i], &b[j], kp))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn kp(c: f64, l: f64) -> KernelParams {
        KernelParams::new(c, l, 0.1)
    }

    #[test]
    fn zero_distance_is_signal_variance() {
        let p = Point2::new(3.7, -1.2);
        assert_eq!(kernel_eval(&p, &p, &kp(1.0, 0.1)), 1.0);
    }

    #[test]
    fn one_length_scale_apart() {
        let v = kernel_eval(&Point2::new(0.0, 0.0), &Point2::new(0.1, 0.0), &kp(1.0, 0.1));
        assert!((v - (-0.5f64).exp()).abs() < 1e-15);
        assert!((v - 0.60653).abs() < 1e-5);
    }

    #[test]
    fn amplitude_enters_squared() {
        let v = kernel_eval(&Point2::new(0.0, 0.0), &Point2::new(3.0, 4.0), &kp(2.0, 5.0));
        assert!((v - 4.0 * (-0.5f64).exp()).abs() < 1e-14);
    }

    #[test]
    fn rejects_nonpositive_params() {
        assert!(KernelParams::new(0.0, 0.1, 0.1).validate().is_err());
        assert!(KernelParams::new(1.0, -0.1, 0.1).validate().is_err());
        assert!(KernelParams::new(1.0, 0.1, 0.0).validate().is_err());
        assert!(KernelParams::new(1.0, 0.1, 0.1).validate().is_ok());
    }

    proptest! {
        #[test]
        fn symmetric(ax in -10.0..10.0f64, ay in -10.0..10.0f64, bx in -10.0..10.0f64, by in -10.0..10.0f64,
                     c in 0.1..3.0f64, l in 0.05..2.0f64) {
            let a = Point2::new(ax, ay);
            let b = Point2::new(bx, by);
            let k = kp(c, l);
            prop_assert_eq!(kernel_eval(&a, &b, &k), kernel_eval(&b, &a, &k));
        }
    }
}
