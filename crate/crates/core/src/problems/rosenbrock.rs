use crate::oracle::GradientOracle;

/// Two-dimensional Rosenbrock valley `(a - x)^2 + b (y - x^2)^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct RosenbrockProblem {
    pub a: f64,
    pub b: f64,
    minimizer: [f64; 2],
}

impl Default for RosenbrockProblem {
    fn default() -> Self {
        RosenbrockProblem::new(1.0, 100.0)
    }
}

impl RosenbrockProblem {
    pub fn new(a: f64, b: f64) -> Self {
        RosenbrockProblem {
            a,
            b,
            minimizer: [a, a * a],
        }
    }

    pub fn eval(&self, x: &[f64]) -> (f64, [f64; 2]) {
        let (u, v) = (x[0], x[1]);
        let r = self.a - u;
        let s = v - u * u;
        let f = r * r + self.b * s * s;
        let g = [-2.0 * r - 4.0 * self.b * u * s, 2.0 * self.b * s];
        (f, g)
    }
}

/// Classical Rosenbrock value and gradient with `a = 1`, `b = 100`.
pub fn rosenbrock_eval(x: [f64; 2]) -> (f64, [f64; 2]) {
    RosenbrockProblem::default().eval(&x)
}

impl GradientOracle for RosenbrockProblem {
    fn dim(&self) -> usize {
        2
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.eval(x).0
    }

    fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.eval(x).1);
    }

    fn minimizer(&self) -> Option<&[f64]> {
        Some(&self.minimizer)
    }

    fn min_value(&self) -> Option<f64> {
        Some(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::central_difference;

    #[test]
    fn minimum() {
        assert_eq!(rosenbrock_eval([1.0, 1.0]), (0.0, [0.0, 0.0]));
    }

    #[test]
    fn origin() {
        let (f, g) = rosenbrock_eval([0.0, 0.0]);
        assert_eq!(f, 1.0);
        assert_eq!(g, [-2.0, 0.0]);
        let fd = central_difference(&RosenbrockProblem::default(), &[0.0, 0.0], 1e-6);
        assert!((fd[0] + 2.0).abs() < 1e-6 && fd[1].abs() < 1e-6);
    }

    #[test]
    fn left_branch_matches_finite_differences() {
        let (f, g) = rosenbrock_eval([-1.0, 1.0]);
        assert_eq!(f, 4.0);
        let fd = central_difference(&RosenbrockProblem::default(), &[-1.0, 1.0], 1e-6);
        for (a, b) in g.iter().zip(&fd) {
            assert!((a - b).abs() <= 1e-5 * a.abs().max(1.0), "{a} vs {b}");
        }
    }
}
