//! Diagnostics computed from states and trajectories.

mod lyapunov;
mod portrait;
mod rate;
mod spectrum;

pub use lyapunov::{lyapunov_g, lyapunov_series, lyapunov_with_reference, LyapunovValue};
pub use portrait::{phase_portrait_metrics, PortraitMetrics, PortraitTracker, OVERSHOOT_DEADBAND};
pub use rate::{fit_exponential_rate, fit_rate_series, RateFit, MIN_FIT_SAMPLES};
pub use spectrum::{
    power_spectrum, project_samples, trajectory_spectrum, SpectrumReport, MIN_SPECTRUM_SAMPLES,
};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::oracle::{step_rng, GradientOracle};

/// Radius of the sampling ball used by [`check_strong_convexity_condition`].
pub const CONVEXITY_BALL_RADIUS: f64 = 10.0;

/// Tests `a (f(x) - f*) + b |x - x*|^2 <= (x - x*) . (grad f(x) - grad f(x*))`
/// at `n_samples` points drawn uniformly from the ball of radius 10 around `x*`.
///
/// A relative slack of `1e-12` absorbs rounding where the inequality is tight.
pub fn check_strong_convexity_condition(
    oracle: &dyn GradientOracle,
    a: f64,
    b: f64,
    n_samples: usize,
    seed: u64,
) -> Result<bool> {
    let x_star = oracle
        .minimizer()
        .ok_or_else(|| Error::InvalidArgument("oracle exposes no minimizer".into()))?
        .to_vec();
    let n = oracle.dim();
    let f_star = oracle.value(&x_star);
    let g_star = oracle.gradient(&x_star);
    let mut rng = step_rng(seed, 0x636f_6e76);
    let mut x = vec![0.0; n];
    let mut g = vec![0.0; n];
    for _ in 0..n_samples {
        let dir: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let u: f64 = rng.random();
        let r = CONVEXITY_BALL_RADIUS * u.powf(1.0 / n as f64);
        for ((xi, di), si) in x.iter_mut().zip(&dir).zip(&x_star) {
            *xi = si + r * di / norm;
        }
        oracle.gradient_into(&x, &mut g);
        let dx2: f64 = x.iter().zip(&x_star).map(|(u, v)| (u - v) * (u - v)).sum();
        let lhs = a * (oracle.value(&x) - f_star) + b * dx2;
        let rhs: f64 = x
            .iter()
            .zip(&x_star)
            .zip(g.iter().zip(&g_star))
            .map(|((xi, si), (gi, gs))| (xi - si) * (gi - gs))
            .sum();
        if lhs > rhs + 1e-12 * (lhs.abs() + rhs.abs()) {
            return Ok(false);
        }
    }
    Ok(true)
}
