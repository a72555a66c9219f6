//! Instantiating problems and initial states from specs.

use rand::Rng;
use rand_distr::StandardNormal;

use kinopt::oracle::step_rng;
use kinopt::problems::{
    make_fig3_quadratic, make_toy_classifier, QuadraticProblem, RosenbrockProblem,
    ToyClassifierProblem,
};
use kinopt::{init_state, GradientOracle, Noisy, OptState};

use crate::spec::{lattice_point, Direction, ProblemSpec, RunSpec, X0Spec};
use crate::HarnessError;

const BALL_SALT: u64 = 0x6261_6c6c;

#[derive(Debug, Clone)]
pub enum Objective {
    Quadratic(QuadraticProblem),
    Rosenbrock(RosenbrockProblem),
    Toy(ToyClassifierProblem),
}

/// A problem ready to run, with optional gradient noise.
pub struct Problem {
    pub objective: Objective,
    pub oracle: Box<dyn GradientOracle>,
}

impl Problem {
    pub fn build(spec: &ProblemSpec, sigma: f64) -> Result<Self, HarnessError> {
        let objective = match spec {
            ProblemSpec::Quadratic {
                eigenvalues,
                rotation_seed,
            } => {
                let q = QuadraticProblem::diagonal(eigenvalues.clone())?;
                Objective::Quadratic(match rotation_seed {
                    Some(s) => q.with_random_rotation(*s),
                    None => q,
                })
            }
            ProblemSpec::Fig3Quadratic {
                dim,
                min_eig,
                max_eig,
                rotation_seed,
            } => Objective::Quadratic(make_fig3_quadratic(
                *dim,
                *min_eig,
                *max_eig,
                *rotation_seed,
            )?),
            ProblemSpec::Rosenbrock { a, b } => {
                Objective::Rosenbrock(RosenbrockProblem::new(*a, *b))
            }
            ProblemSpec::ToyClassifier {
                n_examples,
                n_features,
                hidden,
                data_seed,
                batch_size,
                l2,
            } => {
                let mut t = make_toy_classifier(*n_examples, *n_features, *hidden, *data_seed)?
                    .with_l2(*l2);
                if let Some(b) = batch_size {
                    t = t.with_batch_size(*b as usize)?;
                }
                Objective::Toy(t)
            }
        };
        let inner: Box<dyn GradientOracle> = match &objective {
            Objective::Quadratic(q) => Box::new(q.clone()),
            Objective::Rosenbrock(r) => Box::new(r.clone()),
            Objective::Toy(t) => Box::new(t.clone()),
        };
        let oracle: Box<dyn GradientOracle> = if sigma > 0.0 {
            Box::new(Noisy::new(inner, sigma))
        } else {
            inner
        };
        Ok(Problem { objective, oracle })
    }

    pub fn dim(&self) -> usize {
        self.oracle.dim()
    }

    pub fn toy(&self) -> Option<&ToyClassifierProblem> {
        match &self.objective {
            Objective::Toy(t) => Some(t),
            _ => None,
        }
    }

    pub fn default_x0(&self, data_seed: u64) -> Vec<f64> {
        match &self.objective {
            Objective::Quadratic(q) => vec![1.0; q.dim()],
            Objective::Rosenbrock(_) => vec![-1.0, -1.0],
            Objective::Toy(t) => t.initial_weights(data_seed),
        }
    }

    /// Unit vector for spectrum projections.
    pub fn direction(&self, d: &Direction) -> Result<Vec<f64>, HarnessError> {
        let v = match (d, &self.objective) {
            (Direction::TopEigenvector, Objective::Quadratic(q)) => q.top_eigenvector(),
            (Direction::TopEigenvector, _) => {
                return Err(HarnessError::Config(
                    "top_eigenvector direction needs a quadratic problem".into(),
                ))
            }
            (Direction::Explicit(v), _) => normalized(v)?,
        };
        if v.len() != self.dim() {
            return Err(kinopt::Error::DimensionMismatch {
                expected: self.dim(),
                found: v.len(),
            }
            .into());
        }
        Ok(v)
    }
}

/// `v / |v|`; errors for the zero vector.
pub fn normalized(v: &[f64]) -> Result<Vec<f64>, HarnessError> {
    let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if !(n > 0.0 && n.is_finite()) {
        return Err(HarnessError::Config(
            "direction must be a finite non-zero vector".into(),
        ));
    }
    Ok(v.iter().map(|a| a / n).collect())
}

fn data_seed(spec: &ProblemSpec) -> u64 {
    match spec {
        ProblemSpec::ToyClassifier { data_seed, .. } => *data_seed,
        _ => 0,
    }
}

/// Initial position for `spec` on `problem`.
pub fn initial_position(spec: &RunSpec, problem: &Problem) -> Vec<f64> {
    match &spec.x0 {
        X0Spec::Default => problem.default_x0(data_seed(&spec.problem)),
        X0Spec::Explicit(v) => v.clone(),
        X0Spec::Ball { center, radius } => {
            let n = center.len();
            let mut rng = step_rng(spec.seed, BALL_SALT);
            let dir: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let norm = dir
                .iter()
                .map(|a| a * a)
                .sum::<f64>()
                .sqrt()
                .max(f64::MIN_POSITIVE);
            let u: f64 = rng.random();
            let r = radius * u.powf(1.0 / n.max(1) as f64);
            center
                .iter()
                .zip(&dir)
                .map(|(c, d)| c + r * d / norm)
                .collect()
        }
        X0Spec::GridCell {
            lower,
            upper,
            shape,
            cell,
        } => lattice_point(lower, upper, shape, cell),
    }
}

/// Initial state with zero momentum and `xi0`-filled friction.
pub fn initial_state(spec: &RunSpec, problem: &Problem) -> Result<OptState, HarnessError> {
    let x0 = initial_position(spec, problem);
    let n = x0.len();
    let xi = spec.kind().uses_xi().then(|| vec![spec.xi0; n]);
    Ok(init_state(spec.kind(), x0, vec![0.0; n], xi, None)?)
}
