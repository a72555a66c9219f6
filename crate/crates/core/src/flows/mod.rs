//! Exactly solvable sub-flows of the damped Hamiltonian vector fields.
//!
//! Each optimizer splits its ODE into pieces that can be integrated in closed
//! form over one step and composes them (Lie-Trotter). Every function here
//! advances one piece in place and touches only the components it declares
//! in [`SubFlow::acts_on`].

pub mod reference;

use crate::error::{Error, Result};
use crate::state::{check_dim, OptState};

/// State component a sub-flow may write.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    X,
    P,
    Xi,
    Zeta,
}

/// The eight closed-form pieces the optimizers are built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SubFlow {
    /// `x' = p`
    Drift,
    /// `x' = p / sqrt(zeta + eps)`
    ScaledDrift,
    /// `p' = -grad f(x)` with the gradient frozen at the step start
    Kick,
    /// `p' = -xi * p`, `xi' = p^2 / rho`
    FrictionExchange,
    /// `p' = -c p^3`
    CubicDamping,
    /// `p' = -gamma p`, `xi' = -alpha xi`
    Damping,
    /// `p' = -gamma p`
    MomentumDamping,
    /// `zeta' = grad^2 - alpha zeta`
    SecondMoment,
}

impl SubFlow {
    pub const ALL: [SubFlow; 8] = [
        SubFlow::Drift,
        SubFlow::ScaledDrift,
        SubFlow::Kick,
        SubFlow::FrictionExchange,
        SubFlow::CubicDamping,
        SubFlow::Damping,
        SubFlow::MomentumDamping,
        SubFlow::SecondMoment,
    ];

    /// Conventional single-letter label (A, A', B, C, C', D, D', E).
    pub fn label(self) -> &'static str {
        match self {
            SubFlow::Drift => "A",
            SubFlow::ScaledDrift => "A'",
            SubFlow::Kick => "B",
            SubFlow::FrictionExchange => "C",
            SubFlow::CubicDamping => "C'",
            SubFlow::Damping => "D",
            SubFlow::MomentumDamping => "D'",
            SubFlow::SecondMoment => "E",
        }
    }

    pub fn acts_on(self) -> &'static [Component] {
        match self {
            SubFlow::Drift | SubFlow::ScaledDrift => &[Component::X],
            SubFlow::Kick | SubFlow::CubicDamping | SubFlow::MomentumDamping => &[Component::P],
            SubFlow::FrictionExchange | SubFlow::Damping => &[Component::P, Component::Xi],
            SubFlow::SecondMoment => &[Component::Zeta],
        }
    }
}

/// Coefficients a sub-flow may read. Unused fields are ignored.
#[derive(Debug, Clone, Copy, Default)]
pub struct FlowParams<'a> {
    pub gamma: f64,
    pub alpha: f64,
    pub rho: f64,
    pub c: f64,
    pub eps_div: f64,
    /// Gradient at the pre-step position; required by the kick and the
    /// second-moment flow.
    pub grad: Option<&'a [f64]>,
}

impl<'a> FlowParams<'a> {
    fn grad(&self) -> Result<&'a [f64]> {
        self.grad
            .ok_or_else(|| Error::InvalidArgument("sub-flow needs a gradient".into()))
    }
}

/// Advances `state` by `dt` along one sub-flow.
pub fn apply(kind: SubFlow, state: &mut OptState, dt: f64, params: &FlowParams<'_>) -> Result<()> {
    match kind {
        SubFlow::Drift => {
            drift(state, dt);
            Ok(())
        }
        SubFlow::ScaledDrift => scaled_drift(state, dt, params.eps_div),
        SubFlow::Kick => kick(state, dt, params.grad()?),
        SubFlow::FrictionExchange => friction_exchange(state, dt, params.rho),
        SubFlow::CubicDamping => {
            cubic_damping(state, dt, params.c);
            Ok(())
        }
        SubFlow::Damping => damping(state, dt, params.gamma, params.alpha),
        SubFlow::MomentumDamping => {
            momentum_damping(state, dt, params.gamma);
            Ok(())
        }
        SubFlow::SecondMoment => second_moment(state, dt, params.alpha, params.grad()?),
    }
}

/// `x <- x + dt p`
pub fn drift(state: &mut OptState, dt: f64) {
    for (x, p) in state.x.iter_mut().zip(&state.p) {
        *x += dt * p;
    }
}

/// `x <- x + dt p / sqrt(zeta + eps)`
pub fn scaled_drift(state: &mut OptState, dt: f64, eps_div: f64) -> Result<()> {
    let zeta = state
        .zeta
        .as_deref()
        .ok_or(Error::MissingAuxiliary { which: "zeta" })?;
    for ((x, p), z) in state.x.iter_mut().zip(&state.p).zip(zeta) {
        *x += dt * p / (z + eps_div).sqrt();
    }
    Ok(())
}

/// `p <- p - dt grad`
pub fn kick(state: &mut OptState, dt: f64, grad: &[f64]) -> Result<()> {
    check_dim(state.p.len(), grad.len())?;
    for (p, g) in state.p.iter_mut().zip(grad) {
        *p -= dt * g;
    }
    Ok(())
}

/// Exchanges kinetic energy between `p` and the adaptive friction `xi`.
///
/// `p <- exp(-xi dt) p` and `xi <- sqrt(xi^2 + (1 - exp(-2 xi dt)) p^2 / rho)`,
/// both evaluated from the pre-step `(p, xi)`. Per coordinate
/// `p^2 + rho xi^2` is invariant.
pub fn friction_exchange(state: &mut OptState, dt: f64, rho: f64) -> Result<()> {
    let xi = state
        .xi
        .as_deref_mut()
        .ok_or(Error::MissingAuxiliary { which: "xi" })?;
    for (p, xi) in state.p.iter_mut().zip(xi.iter_mut()) {
        let (p0, xi0) = (*p, *xi);
        let transfer = -(-2.0 * xi0 * dt).exp_m1();
        *p = (-xi0 * dt).exp() * p0;
        *xi = (xi0 * xi0 + transfer * p0 * p0 / rho).sqrt();
    }
    Ok(())
}

// Above this, 1 + arg == arg in double precision and 2 c p^2 dt may overflow.
const CUBIC_LOG_SPACE: f64 = 1e300;

/// `p <- p / sqrt(1 + 2 c p^2 dt)`, the exact flow of `p' = -c p^3`.
pub fn cubic_damping(state: &mut OptState, dt: f64, c: f64) {
    if c == 0.0 {
        return;
    }
    for p in state.p.iter_mut() {
        *p = cubic_damped(*p, c, dt);
    }
}

fn cubic_damped(p: f64, c: f64, dt: f64) -> f64 {
    if p == 0.0 {
        return p;
    }
    let arg = 2.0 * c * p * p * dt;
    if arg.is_finite() && arg <= CUBIC_LOG_SPACE {
        return p / (1.0 + arg).sqrt();
    }
    let ln_abs = p.abs().ln();
    let ln_arg = (2.0 * c * dt).ln() + 2.0 * ln_abs;
    (ln_abs - 0.5 * ln_arg).exp().copysign(p)
}

/// `p <- exp(-gamma dt) p`, `xi <- exp(-alpha dt) xi`
pub fn damping(state: &mut OptState, dt: f64, gamma: f64, alpha: f64) -> Result<()> {
    let xi = state
        .xi
        .as_deref_mut()
        .ok_or(Error::MissingAuxiliary { which: "xi" })?;
    let decay = (-alpha * dt).exp();
    for v in xi.iter_mut() {
        *v *= decay;
    }
    momentum_damping(state, dt, gamma);
    Ok(())
}

/// `p <- exp(-gamma dt) p`
pub fn momentum_damping(state: &mut OptState, dt: f64, gamma: f64) {
    if gamma == 0.0 {
        return;
    }
    let decay = (-gamma * dt).exp();
    for p in state.p.iter_mut() {
        *p *= decay;
    }
}

/// `zeta <- exp(-alpha dt) zeta + (1 - exp(-alpha dt)) / alpha * grad^2`
pub fn second_moment(state: &mut OptState, dt: f64, alpha: f64, grad: &[f64]) -> Result<()> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidHyperParam {
            name: "alpha",
            value: alpha,
            reason: "must be positive",
        });
    }
    let n = state.x.len();
    let zeta = state
        .zeta
        .as_deref_mut()
        .ok_or(Error::MissingAuxiliary { which: "zeta" })?;
    check_dim(n, grad.len())?;
    let decay = (-alpha * dt).exp();
    let gain = -(-alpha * dt).exp_m1() / alpha;
    for (z, g) in zeta.iter_mut().zip(grad) {
        *z = decay * *z + gain * g * g;
    }
    Ok(())
}
