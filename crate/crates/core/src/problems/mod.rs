//! Benchmark objectives.

mod classifier;
mod quadratic;
mod rosenbrock;

pub use classifier::{make_toy_classifier, Dataset, ToyClassifierProblem};
pub use quadratic::{
    default_fig3_quadratic, log_spaced, make_fig3_quadratic, unit_gradient_point, QuadraticProblem,
};
pub use rosenbrock::{rosenbrock_eval, RosenbrockProblem};

use crate::oracle::GradientOracle;

/// Central finite-difference gradient with step `h`.
pub fn central_difference(oracle: &dyn GradientOracle, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = oracle.value(&probe);
            probe[i] = x[i] - h;
            let down = oracle.value(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}
