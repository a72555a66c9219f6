//! Objective functions and gradient sources.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::Result;
use crate::state::check_dim;

/// A differentiable objective.
///
/// Implementations must be safe for concurrent read-only use: distinct runs
/// evaluate the same oracle from several threads.
pub trait GradientOracle: Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> f64;

    /// Writes the exact gradient at `x` into `out`.
    fn gradient_into(&self, x: &[f64], out: &mut [f64]);

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim()];
        self.gradient_into(x, &mut g);
        g
    }

    fn minimizer(&self) -> Option<&[f64]> {
        None
    }

    fn min_value(&self) -> Option<f64> {
        self.minimizer().map(|m| self.value(m))
    }

    /// Hessian eigenvalue bounds `(m, M)` when known.
    fn curvature_bounds(&self) -> Option<(f64, f64)> {
        None
    }

    /// Whether [`GradientOracle::sample_gradient_into`] differs from the exact gradient.
    fn is_stochastic(&self) -> bool {
        false
    }

    /// Writes an unbiased gradient estimate, reproducible from `(seed, step)`.
    fn sample_gradient_into(&self, x: &[f64], seed: u64, step: u64, out: &mut [f64]) {
        let _ = (seed, step);
        self.gradient_into(x, out)
    }
}

impl<T: GradientOracle + ?Sized> GradientOracle for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value(&self, x: &[f64]) -> f64 {
        (**self).value(x)
    }
    fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        (**self).gradient_into(x, out)
    }
    fn minimizer(&self) -> Option<&[f64]> {
        (**self).minimizer()
    }
    fn min_value(&self) -> Option<f64> {
        (**self).min_value()
    }
    fn curvature_bounds(&self) -> Option<(f64, f64)> {
        (**self).curvature_bounds()
    }
    fn is_stochastic(&self) -> bool {
        (**self).is_stochastic()
    }
    fn sample_gradient_into(&self, x: &[f64], seed: u64, step: u64, out: &mut [f64]) {
        (**self).sample_gradient_into(x, seed, step, out)
    }
}

impl<T: GradientOracle + ?Sized> GradientOracle for Box<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value(&self, x: &[f64]) -> f64 {
        (**self).value(x)
    }
    fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        (**self).gradient_into(x, out)
    }
    fn minimizer(&self) -> Option<&[f64]> {
        (**self).minimizer()
    }
    fn min_value(&self) -> Option<f64> {
        (**self).min_value()
    }
    fn curvature_bounds(&self) -> Option<(f64, f64)> {
        (**self).curvature_bounds()
    }
    fn is_stochastic(&self) -> bool {
        (**self).is_stochastic()
    }
    fn sample_gradient_into(&self, x: &[f64], seed: u64, step: u64, out: &mut [f64]) {
        (**self).sample_gradient_into(x, seed, step, out)
    }
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Combines two integers into one well-mixed seed.
pub fn mix_seed(a: u64, b: u64) -> u64 {
    splitmix64(splitmix64(a) ^ b.wrapping_mul(0xD1B5_4A32_D192_ED03))
}

/// Generator dedicated to one `(seed, step)` pair.
pub fn step_rng(seed: u64, step: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix_seed(seed, step))
}

/// Additive Gaussian gradient noise with a per-coordinate standard deviation.
///
/// The gradient variance bound is `dim * sigma^2`.
#[derive(Debug, Clone)]
pub struct Noisy<O> {
    pub inner: O,
    pub sigma: f64,
}

impl<O: GradientOracle> Noisy<O> {
    pub fn new(inner: O, sigma: f64) -> Self {
        assert!(
            sigma >= 0.0 && sigma.is_finite(),
            "noise sigma must be finite and >= 0"
        );
        Noisy { inner, sigma }
    }

    pub fn variance_bound(&self) -> f64 {
        self.inner.dim() as f64 * self.sigma * self.sigma
    }
}

impl<O: GradientOracle> GradientOracle for Noisy<O> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.inner.value(x)
    }
    fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        self.inner.gradient_into(x, out)
    }
    fn minimizer(&self) -> Option<&[f64]> {
        self.inner.minimizer()
    }
    fn min_value(&self) -> Option<f64> {
        self.inner.min_value()
    }
    fn curvature_bounds(&self) -> Option<(f64, f64)> {
        self.inner.curvature_bounds()
    }
    fn is_stochastic(&self) -> bool {
        self.sigma > 0.0 || self.inner.is_stochastic()
    }
    fn sample_gradient_into(&self, x: &[f64], seed: u64, step: u64, out: &mut [f64]) {
        self.inner.sample_gradient_into(x, seed, step, out);
        if self.sigma == 0.0 {
            return;
        }
        let mut rng = step_rng(seed ^ 0x6E6F_6973_6500_0000, step);
        for g in out.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *g += self.sigma * z;
        }
    }
}

/// Gradient estimate at `x` for `(seed, step)`; exact for deterministic oracles.
pub fn eval_stochastic_grad(
    oracle: &dyn GradientOracle,
    x: &[f64],
    seed: u64,
    step: u64,
) -> Result<Vec<f64>> {
    check_dim(oracle.dim(), x.len())?;
    let mut g = vec![0.0; oracle.dim()];
    oracle.sample_gradient_into(x, seed, step, &mut g);
    Ok(g)
}
