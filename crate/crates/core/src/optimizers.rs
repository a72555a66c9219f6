//! Full per-iteration updates.
//!
//! The split optimizers compose closed-form sub-flows from [`crate::flows`]
//! with one gradient evaluation per step, taken at the pre-step position.
//! Euler-type and baseline rules are written out directly.

use crate::error::{Error, Result};
use crate::flows;
use crate::oracle::GradientOracle;
use crate::state::{check_dim, HyperParams, OptState, OptimizerKind};

/// Time-varying momentum coefficient for mSGD.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MomentumSchedule {
    /// Uses `hp.mu` at every step.
    Constant,
    /// `min(1 - 2^(-1 - log2(floor(t / 250) + 1)), mu_max)`
    Sutskever { mu_max: f64 },
    /// `1 - 3 / (t + 5)`
    Nesterov,
}

/// Scheduled momentum at iteration `t` (0-based).
pub fn schedule_mu(schedule: MomentumSchedule, t: u64, mu: Option<f64>) -> Result<f64> {
    match schedule {
        MomentumSchedule::Constant => mu.ok_or(Error::MissingHyperParam {
            name: "mu",
            kind: OptimizerKind::MsgdEuler,
        }),
        MomentumSchedule::Sutskever { mu_max } => {
            if !(0.0..1.0).contains(&mu_max) {
                return Err(Error::InvalidHyperParam {
                    name: "mu_max",
                    value: mu_max,
                    reason: "must lie in [0, 1)",
                });
            }
            let block = (t / 250 + 1) as f64;
            let raw = 1.0 - (-1.0 - block.log2()).exp2();
            Ok(raw.min(mu_max))
        }
        MomentumSchedule::Nesterov => Ok(1.0 - 3.0 / (t as f64 + 5.0)),
    }
}

/// Momentum coefficient equivalent to friction `gamma` for an mSGD learning
/// rate `dt`: `mu = 1 - gamma sqrt(dt)`.
///
/// `gamma = 0` maps to the boundary value 1, which mSGD itself rejects.
pub fn mu_gamma_map(gamma: f64, dt: f64) -> Result<f64> {
    if !(gamma >= 0.0) || !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "mu_gamma_map needs gamma >= 0 and dt > 0, got ({gamma}, {dt})"
        )));
    }
    let damp = gamma * dt.sqrt();
    if damp > 1.0 {
        return Err(Error::InvalidPairing { gamma, dt });
    }
    Ok(1.0 - damp)
}

/// mSGD `(mu, learning rate)` reproducing Euler-discretized linear friction
/// `gamma` at step `h`: the learning rate is `h^2`.
pub fn msgd_equivalent(gamma: f64, h: f64) -> Result<(f64, f64)> {
    let lr = h * h;
    Ok((mu_gamma_map(gamma, lr)?, lr))
}

/// Optimizer identity plus the optional mSGD schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub schedule: Option<MomentumSchedule>,
}

impl OptimizerConfig {
    pub fn new(kind: OptimizerKind) -> Self {
        OptimizerConfig {
            kind,
            schedule: None,
        }
    }

    pub fn with_schedule(kind: OptimizerKind, schedule: MomentumSchedule) -> Result<Self> {
        let cfg = OptimizerConfig {
            kind,
            schedule: Some(schedule),
        };
        cfg.check_schedule()?;
        Ok(cfg)
    }

    fn check_schedule(&self) -> Result<()> {
        match self.schedule {
            Some(_) if self.kind != OptimizerKind::MsgdEuler => {
                Err(Error::ScheduleNotAllowed(self.kind))
            }
            _ => Ok(()),
        }
    }

    /// Checks the schedule and that `hp` carries everything this optimizer reads.
    pub fn validate(&self, hp: &HyperParams) -> Result<()> {
        self.check_schedule()?;
        let scheduled = !matches!(self.schedule, None | Some(MomentumSchedule::Constant));
        hp.validate_for(self.kind, scheduled)?;
        if let Some(s) = self.schedule {
            schedule_mu(s, 0, hp.mu)?;
        }
        if self.kind == OptimizerKind::CdEuler {
            let g = hp.gamma(self.kind)?;
            if g * hp.dt >= 1.0 {
                log::warn!(
                    "cd_euler with gamma*dt = {} >= 1; the linear factor changes sign",
                    g * hp.dt
                );
            }
        }
        Ok(())
    }
}

/// Adaptive friction: C, D, B, A.
pub fn step_ikfad(state: &mut OptState, hp: &HyperParams, grad: &[f64]) -> Result<()> {
    let kind = OptimizerKind::IkfadSplit;
    let dt = hp.dt()?;
    let (gamma, alpha, rho) = (hp.gamma(kind)?, hp.alpha(kind)?, hp.rho(kind)?);
    check_dim(state.dim(), grad.len())?;
    flows::friction_exchange(state, dt, rho)?;
    flows::damping(state, dt, gamma, alpha)?;
    flows::kick(state, dt, grad)?;
    flows::drift(state, dt);
    Ok(())
}

/// Cubic damping: C', D', B, A.
pub fn step_cd_split(state: &mut OptState, hp: &HyperParams, grad: &[f64]) -> Result<()> {
    let kind = OptimizerKind::CdSplit;
    let dt = hp.dt()?;
    let (gamma, c) = (hp.gamma(kind)?, hp.c(kind)?);
    check_dim(state.dim(), grad.len())?;
    flows::cubic_damping(state, dt, c);
    flows::momentum_damping(state, dt, gamma);
    flows::kick(state, dt, grad)?;
    flows::drift(state, dt);
    Ok(())
}

/// Explicit Euler cubic damping; the drift uses the pre-update momentum.
pub fn step_cd_euler(state: &mut OptState, hp: &HyperParams, grad: &[f64]) -> Result<()> {
    let kind = OptimizerKind::CdEuler;
    let dt = hp.dt()?;
    let (gamma, c) = (hp.gamma(kind)?, hp.c(kind)?);
    check_dim(state.dim(), grad.len())?;
    let linear = 1.0 - gamma * dt;
    for ((x, p), g) in state.x.iter_mut().zip(state.p.iter_mut()).zip(grad) {
        let p0 = *p;
        *p = linear * p0 - c * dt * p0 * p0 * p0 - dt * g;
        *x += dt * p0;
    }
    Ok(())
}

/// Cubically damped continuous Adam: C', D', B, A', E. No bias correction.
pub fn step_cadam(state: &mut OptState, hp: &HyperParams, grad: &[f64]) -> Result<()> {
    let kind = OptimizerKind::CadamSplit;
    let dt = hp.dt()?;
    let (gamma, c, alpha, eps) = (
        hp.gamma(kind)?,
        hp.c(kind)?,
        hp.alpha(kind)?,
        hp.eps_div(kind)?,
    );
    check_dim(state.dim(), grad.len())?;
    state.zeta()?;
    flows::cubic_damping(state, dt, c);
    flows::momentum_damping(state, dt, gamma);
    flows::kick(state, dt, grad)?;
    flows::scaled_drift(state, dt, eps)?;
    flows::second_moment(state, dt, alpha, grad)?;
    Ok(())
}

/// Linear friction only: D', B, A.
pub fn step_ldhd_split(state: &mut OptState, hp: &HyperParams, grad: &[f64]) -> Result<()> {
    let kind = OptimizerKind::LdhdSplit;
    let dt = hp.dt()?;
    let gamma = hp.gamma(kind)?;
    check_dim(state.dim(), grad.len())?;
    flows::momentum_damping(state, dt, gamma);
    flows::kick(state, dt, grad)?;
    flows::drift(state, dt);
    Ok(())
}

/// Euler-discretized linear friction with the drift using the updated
/// momentum, `p <- (1 - gamma dt) p - dt grad`, `x <- x + dt p`.
///
/// This is the scheme mSGD reproduces under [`msgd_equivalent`].
pub fn step_ldhd_euler(state: &mut OptState, dt: f64, gamma: f64, grad: &[f64]) -> Result<()> {
    check_dim(state.dim(), grad.len())?;
    let linear = 1.0 - dt * gamma;
    for ((x, p), g) in state.x.iter_mut().zip(state.p.iter_mut()).zip(grad) {
        *p = linear * *p - dt * g;
        *x += dt * *p;
    }
    Ok(())
}

/// Heavy-ball momentum in accumulated-gradient form:
/// `p <- mu p + grad`, `x <- x - dt p`.
pub fn step_msgd(
    state: &mut OptState,
    hp: &HyperParams,
    grad: &[f64],
    t: u64,
    schedule: Option<MomentumSchedule>,
) -> Result<()> {
    let kind = OptimizerKind::MsgdEuler;
    let dt = hp.dt()?;
    let mu = match schedule {
        Some(s) => schedule_mu(s, t, hp.mu)?,
        None => hp.mu(kind)?,
    };
    if !(0.0..1.0).contains(&mu) {
        return Err(Error::InvalidHyperParam {
            name: "mu",
            value: mu,
            reason: "must lie in [0, 1)",
        });
    }
    check_dim(state.dim(), grad.len())?;
    for ((x, p), g) in state.x.iter_mut().zip(state.p.iter_mut()).zip(grad) {
        *p = mu * *p + g;
        *x -= dt * *p;
    }
    Ok(())
}

/// Adam with bias correction; `t` is the 1-based iteration number.
/// `state.p` holds the first moment and `state.zeta` the second.
pub fn step_adam_baseline(
    state: &mut OptState,
    hp: &HyperParams,
    grad: &[f64],
    t: u64,
) -> Result<()> {
    let kind = OptimizerKind::AdamBaseline;
    let dt = hp.dt()?;
    let (b1, b2, eps) = (hp.beta1(kind)?, hp.beta2(kind)?, hp.eps_div(kind)?);
    if t == 0 {
        return Err(Error::InvalidArgument(
            "Adam iteration numbers start at 1".into(),
        ));
    }
    check_dim(state.dim(), grad.len())?;
    let exp = i32::try_from(t).unwrap_or(i32::MAX);
    let bc1 = 1.0 - b1.powi(exp);
    let bc2 = 1.0 - b2.powi(exp);
    let v = state
        .zeta
        .as_deref_mut()
        .ok_or(Error::MissingAuxiliary { which: "zeta" })?;
    for (((x, m), v), g) in state
        .x
        .iter_mut()
        .zip(state.p.iter_mut())
        .zip(v.iter_mut())
        .zip(grad)
    {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *x -= dt * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}

/// Applies one update of `config` given the gradient at the current position.
/// Does not advance `step_count`.
pub fn apply_update(
    config: &OptimizerConfig,
    state: &mut OptState,
    hp: &HyperParams,
    grad: &[f64],
) -> Result<()> {
    let t = state.step_count;
    match config.kind {
        OptimizerKind::IkfadSplit => step_ikfad(state, hp, grad),
        OptimizerKind::CdSplit => step_cd_split(state, hp, grad),
        OptimizerKind::CdEuler => step_cd_euler(state, hp, grad),
        OptimizerKind::CadamSplit => step_cadam(state, hp, grad),
        OptimizerKind::LdhdSplit => step_ldhd_split(state, hp, grad),
        OptimizerKind::MsgdEuler => step_msgd(state, hp, grad, t, config.schedule),
        OptimizerKind::AdamBaseline => step_adam_baseline(state, hp, grad, t + 1),
    }
}

/// Reusable stepping context: owns the gradient buffer and a copy of the
/// last finite state.
pub struct Stepper<'a> {
    config: OptimizerConfig,
    hp: HyperParams,
    oracle: &'a dyn GradientOracle,
    seed: u64,
    grad: Vec<f64>,
    backup: OptState,
}

impl<'a> Stepper<'a> {
    pub fn new(
        config: OptimizerConfig,
        hp: HyperParams,
        oracle: &'a dyn GradientOracle,
        seed: u64,
        state: &OptState,
    ) -> Result<Self> {
        config.validate(&hp)?;
        check_dim(oracle.dim(), state.dim())?;
        check_aux(config.kind, state)?;
        if config.kind == OptimizerKind::IkfadSplit {
            let zeros = state
                .xi
                .as_deref()
                .map_or(0, |xi| xi.iter().filter(|&&v| v == 0.0).count());
            if zeros > 0 {
                log::warn!("{zeros} xi components start at 0 and stay there; those coordinates follow ldhd");
            }
        }
        Ok(Stepper {
            config,
            hp,
            oracle,
            seed,
            grad: vec![0.0; oracle.dim()],
            backup: state.clone(),
        })
    }

    pub fn hp(&self) -> &HyperParams {
        &self.hp
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.config
    }

    /// Advances `state` by one iteration. On a non-finite result the state is
    /// rolled back to its last finite value and [`Error::Diverged`] is returned.
    pub fn advance(&mut self, state: &mut OptState) -> Result<()> {
        self.backup.clone_from(state);
        if self.oracle.is_stochastic() {
            self.oracle
                .sample_gradient_into(&state.x, self.seed, state.step_count, &mut self.grad);
        } else {
            self.oracle.gradient_into(&state.x, &mut self.grad);
        }
        apply_update(&self.config, state, &self.hp, &self.grad)?;
        state.step_count += 1;
        if !state.is_finite() {
            let step = state.step_count;
            std::mem::swap(state, &mut self.backup);
            return Err(Error::Diverged {
                step,
                last_finite: Box::new(state.clone()),
            });
        }
        Ok(())
    }
}

fn check_aux(kind: OptimizerKind, state: &OptState) -> Result<()> {
    if kind.uses_xi() {
        state.xi()?;
    }
    if kind.uses_zeta() {
        state.zeta()?;
    }
    Ok(())
}

/// One iteration as a pure function of the state.
pub fn step(
    config: &OptimizerConfig,
    state: &OptState,
    hp: &HyperParams,
    oracle: &dyn GradientOracle,
    seed: u64,
) -> Result<OptState> {
    let mut next = state.clone();
    Stepper::new(*config, hp.clone(), oracle, seed, state)?.advance(&mut next)?;
    Ok(next)
}
