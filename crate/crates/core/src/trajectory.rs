//! Recorded runs.

use crate::error::{Error, Result};
use crate::optimizers::{OptimizerConfig, Stepper};
use crate::oracle::GradientOracle;
use crate::state::{HyperParams, OptState};

/// What to record while iterating.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RecordOptions {
    pub steps: u64,
    /// Scalar diagnostics every `record_stride` steps.
    pub record_stride: u64,
    /// Full state snapshots every `sample_stride` steps, if set.
    pub sample_stride: Option<u64>,
}

impl RecordOptions {
    pub fn new(steps: u64) -> Self {
        RecordOptions {
            steps,
            record_stride: 1,
            sample_stride: None,
        }
    }

    pub fn with_record_stride(mut self, stride: u64) -> Self {
        self.record_stride = stride;
        self
    }

    pub fn with_sample_stride(mut self, stride: u64) -> Self {
        self.sample_stride = Some(stride);
        self
    }
}

/// Diagnostics of one run, sampled on a uniform grid of steps.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub record_stride: u64,
    pub steps: Vec<u64>,
    pub times: Vec<f64>,
    /// `f - f*` when the minimum is known, else `f`.
    pub losses: Vec<f64>,
    pub loss_is_gap: bool,
    pub p_norms: Vec<f64>,
    pub xi_norms: Option<Vec<f64>>,
    pub sample_stride: Option<u64>,
    pub samples: Vec<OptState>,
    /// Last finite state reached.
    pub final_state: OptState,
    /// Step at which a non-finite state appeared.
    pub diverged_at: Option<u64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `loss + ||p||^2 + ||xi||^2` at each record.
    pub fn energy_sum(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| {
                let xi = self.xi_norms.as_ref().map_or(0.0, |v| v[i] * v[i]);
                self.losses[i] + self.p_norms[i] * self.p_norms[i] + xi
            })
            .collect()
    }

    pub fn best_loss(&self) -> Option<f64> {
        self.losses.iter().copied().reduce(f64::min)
    }

    fn push(&mut self, state: &OptState, loss: f64) {
        self.steps.push(state.step_count);
        self.times.push(state.step_count as f64 * self.dt);
        self.losses.push(loss);
        self.p_norms.push(state.p_norm());
        if let Some(v) = self.xi_norms.as_mut() {
            v.push(state.xi_norm().unwrap_or(0.0));
        }
    }
}

/// Loss reported for `x`: the optimality gap when `f*` is known.
pub fn reported_loss(oracle: &dyn GradientOracle, x: &[f64]) -> f64 {
    let f = oracle.value(x);
    oracle.min_value().map_or(f, |m| f - m)
}

/// Iterates from `state` and records the trajectory.
///
/// Divergence is not an error: the run stops and `diverged_at` is set.
pub fn integrate(
    config: &OptimizerConfig,
    hp: &HyperParams,
    oracle: &dyn GradientOracle,
    state: OptState,
    seed: u64,
    opts: RecordOptions,
) -> Result<Trajectory> {
    integrate_with(config, hp, oracle, state, seed, opts, |_| {})
}

/// As [`integrate`], calling `observe` on the initial state and after every step.
pub fn integrate_with(
    config: &OptimizerConfig,
    hp: &HyperParams,
    oracle: &dyn GradientOracle,
    mut state: OptState,
    seed: u64,
    opts: RecordOptions,
    mut observe: impl FnMut(&OptState),
) -> Result<Trajectory> {
    if opts.record_stride == 0 || opts.sample_stride == Some(0) {
        return Err(Error::InvalidArgument("strides must be positive".into()));
    }
    let mut stepper = Stepper::new(*config, hp.clone(), oracle, seed, &state)?;
    let cap = (opts.steps / opts.record_stride + 1) as usize;
    let mut traj = Trajectory {
        dt: hp.dt,
        record_stride: opts.record_stride,
        steps: Vec::with_capacity(cap),
        times: Vec::with_capacity(cap),
        losses: Vec::with_capacity(cap),
        loss_is_gap: oracle.min_value().is_some(),
        p_norms: Vec::with_capacity(cap),
        xi_norms: state.xi.is_some().then(|| Vec::with_capacity(cap)),
        sample_stride: opts.sample_stride,
        samples: Vec::new(),
        final_state: state.clone(),
        diverged_at: None,
    };
    let start = state.step_count;
    let record = |traj: &mut Trajectory, s: &OptState| {
        let k = s.step_count - start;
        if k.is_multiple_of(opts.record_stride) {
            traj.push(s, reported_loss(oracle, &s.x));
        }
        if opts.sample_stride.is_some_and(|st| k.is_multiple_of(st)) {
            traj.samples.push(s.clone());
        }
    };
    record(&mut traj, &state);
    observe(&state);
    for _ in 0..opts.steps {
        match stepper.advance(&mut state) {
            Ok(()) => {
                record(&mut traj, &state);
                observe(&state);
            }
            Err(Error::Diverged { step, .. }) => {
                log::debug!("{} diverged at step {step}", config.kind);
                traj.diverged_at = Some(step);
                break;
            }
            Err(e) => return Err(e),
        }
    }
    traj.final_state = state;
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::QuadraticProblem;
    use crate::state::{rest_state, OptimizerKind};

    #[test]
    fn zero_steps_is_initial_state() {
        let o = QuadraticProblem::diagonal(vec![1.0, 2.0]).unwrap();
        let s = rest_state(OptimizerKind::IkfadSplit, vec![1.0, 1.0]).unwrap();
        let hp = HyperParams::new(0.1)
            .with_gamma(1.0)
            .with_alpha(1.0)
            .with_rho(1.0);
        let cfg = OptimizerConfig::new(OptimizerKind::IkfadSplit);
        let t = integrate(
            &cfg,
            &hp,
            &o,
            s.clone(),
            0,
            RecordOptions::new(0).with_sample_stride(1),
        )
        .unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.samples, vec![s.clone()]);
        assert_eq!(t.final_state, s);
        assert_eq!(t.losses, vec![1.5]);
        assert_eq!(t.xi_norms, Some(vec![0.0]));
    }

    #[test]
    fn strides_and_uniform_times() {
        let o = QuadraticProblem::diagonal(vec![1.0]).unwrap();
        let s = rest_state(OptimizerKind::CdSplit, vec![1.0]).unwrap();
        let hp = HyperParams::new(0.01).with_gamma(1.0).with_c(1.0);
        let cfg = OptimizerConfig::new(OptimizerKind::CdSplit);
        let opts = RecordOptions::new(100)
            .with_record_stride(10)
            .with_sample_stride(25);
        let t = integrate(&cfg, &hp, &o, s, 0, opts).unwrap();
        assert_eq!(t.len(), 11);
        assert_eq!(t.samples.len(), 5);
        assert!(t.xi_norms.is_none());
        for w in t.times.windows(2) {
            assert!((w[1] - w[0] - 0.1).abs() < 1e-12);
        }
        assert_eq!(t.final_state.step_count, 100);
    }

    #[test]
    fn divergence_keeps_partial_trajectory() {
        let o = QuadraticProblem::diagonal(vec![1.0]).unwrap();
        let s = rest_state(OptimizerKind::LdhdSplit, vec![1.0]).unwrap();
        let hp = HyperParams::new(3.0).with_gamma(0.0);
        let cfg = OptimizerConfig::new(OptimizerKind::LdhdSplit);
        let t = integrate(&cfg, &hp, &o, s, 0, RecordOptions::new(100_000)).unwrap();
        let at = t.diverged_at.expect("diverges");
        assert!(t.final_state.is_finite());
        assert_eq!(t.final_state.step_count + 1, at);
        assert_eq!(t.len() as u64, at);
    }

    #[test]
    fn deterministic_runs_are_identical() {
        let o = QuadraticProblem::diagonal(vec![1.0, 5.0, 9.0]).unwrap();
        let s = rest_state(OptimizerKind::IkfadSplit, vec![1.0, -1.0, 0.5]).unwrap();
        let hp = HyperParams::new(0.05)
            .with_gamma(0.2)
            .with_alpha(1.0)
            .with_rho(1.0);
        let cfg = OptimizerConfig::new(OptimizerKind::IkfadSplit);
        let opts = RecordOptions::new(500).with_sample_stride(7);
        let a = integrate(&cfg, &hp, &o, s.clone(), 3, opts).unwrap();
        let b = integrate(&cfg, &hp, &o, s, 3, opts).unwrap();
        assert_eq!(a, b);
    }
}
