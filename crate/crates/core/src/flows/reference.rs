//! Brute-force integration of each sub-flow's ODE with classical RK4.
//!
//! Test oracle for the closed forms in the parent module. All sub-flows are
//! coordinate-wise decoupled, so each coordinate is integrated on its own.

use super::{Component, FlowParams, SubFlow};
use crate::error::{Error, Result};
use crate::state::{check_dim, OptState};

/// Internal RK4 substeps per call.
pub const SUBSTEPS: usize = 1000;

// Per-coordinate state: [x, p, xi, zeta].
type Local = [f64; 4];

fn field(kind: SubFlow, s: &Local, g: f64, params: &FlowParams<'_>) -> Local {
    let [_, p, xi, zeta] = *s;
    match kind {
        SubFlow::Drift => [p, 0.0, 0.0, 0.0],
        SubFlow::ScaledDrift => [p / (zeta + params.eps_div).sqrt(), 0.0, 0.0, 0.0],
        SubFlow::Kick => [0.0, -g, 0.0, 0.0],
        SubFlow::FrictionExchange => [0.0, -xi * p, p * p / params.rho, 0.0],
        SubFlow::CubicDamping => [0.0, -params.c * p * p * p, 0.0, 0.0],
        SubFlow::Damping => [0.0, -params.gamma * p, -params.alpha * xi, 0.0],
        SubFlow::MomentumDamping => [0.0, -params.gamma * p, 0.0, 0.0],
        SubFlow::SecondMoment => [0.0, 0.0, 0.0, g * g - params.alpha * zeta],
    }
}

fn axpy(a: &Local, h: f64, k: &Local) -> Local {
    [
        a[0] + h * k[0],
        a[1] + h * k[1],
        a[2] + h * k[2],
        a[3] + h * k[3],
    ]
}

fn rk4(kind: SubFlow, mut s: Local, g: f64, dt: f64, params: &FlowParams<'_>) -> Local {
    let h = dt / SUBSTEPS as f64;
    for _ in 0..SUBSTEPS {
        let k1 = field(kind, &s, g, params);
        let k2 = field(kind, &axpy(&s, 0.5 * h, &k1), g, params);
        let k3 = field(kind, &axpy(&s, 0.5 * h, &k2), g, params);
        let k4 = field(kind, &axpy(&s, h, &k3), g, params);
        for i in 0..4 {
            s[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    s
}

/// Integrates the sub-ODE of `kind` over `dt` and returns the new state.
///
/// Gradients are frozen at the value supplied in `params`, as in the
/// splitting.
pub fn reference_subflow(
    kind: SubFlow,
    state: &OptState,
    dt: f64,
    params: &FlowParams<'_>,
) -> Result<OptState> {
    let n = state.dim();
    let needs_xi = matches!(kind, SubFlow::FrictionExchange | SubFlow::Damping);
    let needs_zeta = matches!(kind, SubFlow::ScaledDrift | SubFlow::SecondMoment);
    if needs_xi && state.xi.is_none() {
        return Err(Error::MissingAuxiliary { which: "xi" });
    }
    if needs_zeta && state.zeta.is_none() {
        return Err(Error::MissingAuxiliary { which: "zeta" });
    }
    let grad = match kind {
        SubFlow::Kick | SubFlow::SecondMoment => {
            let g = params
                .grad
                .ok_or_else(|| Error::InvalidArgument("sub-flow needs a gradient".into()))?;
            check_dim(n, g.len())?;
            Some(g)
        }
        _ => None,
    };

    let mut out = state.clone();
    for i in 0..n {
        let local = [
            state.x[i],
            state.p[i],
            state.xi.as_ref().map_or(0.0, |v| v[i]),
            state.zeta.as_ref().map_or(0.0, |v| v[i]),
        ];
        let g = grad.map_or(0.0, |g| g[i]);
        let [x, p, xi, zeta] = rk4(kind, local, g, dt, params);
        out.x[i] = x;
        out.p[i] = p;
        if let Some(v) = out.xi.as_mut() {
            v[i] = xi;
        }
        if let Some(v) = out.zeta.as_mut() {
            v[i] = zeta;
        }
    }
    // Undeclared components are copied back so integrator arithmetic cannot
    // touch them (e.g. -0.0 + 0.0).
    let acts = kind.acts_on();
    if !acts.contains(&Component::X) {
        out.x.clone_from(&state.x);
    }
    if !acts.contains(&Component::P) {
        out.p.clone_from(&state.p);
    }
    if !acts.contains(&Component::Xi) {
        out.xi.clone_from(&state.xi);
    }
    if !acts.contains(&Component::Zeta) {
        out.zeta.clone_from(&state.zeta);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flows;

    #[test]
    fn drift_reference_matches_closed_form() {
        let s = OptState {
            x: vec![1.0, 2.0],
            p: vec![3.0, -4.0],
            xi: None,
            zeta: None,
            step_count: 0,
        };
        let r = reference_subflow(SubFlow::Drift, &s, 0.1, &FlowParams::default()).unwrap();
        let mut a = s.clone();
        flows::drift(&mut a, 0.1);
        for (u, v) in r.x.iter().zip(&a.x) {
            assert!((u - v).abs() <= 1e-13 * v.abs());
        }
        assert!((r.x[0] - 1.3).abs() < 1e-13 && (r.x[1] - 1.6).abs() < 1e-13);
    }

    #[test]
    fn cubic_reference_agrees() {
        let s = OptState {
            x: vec![0.0],
            p: vec![2.0],
            xi: None,
            zeta: None,
            step_count: 0,
        };
        let params = FlowParams {
            c: 1.0,
            ..Default::default()
        };
        let r = reference_subflow(SubFlow::CubicDamping, &s, 0.125, &params).unwrap();
        let mut a = s.clone();
        flows::cubic_damping(&mut a, 0.125, 1.0);
        assert!(((r.p[0] - a.p[0]) / a.p[0]).abs() <= 1e-9);
    }

    #[test]
    fn friction_reference_conserves_energy() {
        let s = OptState {
            x: vec![0.0],
            p: vec![3.0],
            xi: Some(vec![4.0]),
            zeta: None,
            step_count: 0,
        };
        let params = FlowParams {
            rho: 1.0,
            ..Default::default()
        };
        let r = reference_subflow(SubFlow::FrictionExchange, &s, 0.1, &params).unwrap();
        let xi = r.xi.unwrap()[0];
        assert!((r.p[0] * r.p[0] + xi * xi - 25.0).abs() < 1e-9);
    }

    #[test]
    fn reference_checks_inputs() {
        let s = OptState {
            x: vec![0.0],
            p: vec![3.0],
            xi: None,
            zeta: None,
            step_count: 0,
        };
        assert!(
            reference_subflow(SubFlow::FrictionExchange, &s, 0.1, &FlowParams::default()).is_err()
        );
        assert!(reference_subflow(SubFlow::Kick, &s, 0.1, &FlowParams::default()).is_err());
    }
}
