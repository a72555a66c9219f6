use std::fmt;

use crate::oracle::GradientOracle;
use crate::state::OptState;

/// `G = f - f* + |p|^2 / 2 + rho/2 |xi|^2` with its parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovValue {
    pub g: f64,
    pub potential: f64,
    pub kinetic: f64,
    /// Zero when the state carries no `xi`.
    pub friction: f64,
    /// `f*` was not known exactly.
    pub approximate: bool,
}

impl fmt::Display for LyapunovValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "G={:.6e} potential={:.6e} kinetic={:.6e} friction={:.6e}{}",
            self.g,
            self.potential,
            self.kinetic,
            self.friction,
            if self.approximate {
                " (approximate f*)"
            } else {
                ""
            }
        )
    }
}

/// Lyapunov value against a caller-supplied `f*`.
pub fn lyapunov_with_reference(
    state: &OptState,
    oracle: &dyn GradientOracle,
    rho: f64,
    f_star: f64,
    approximate: bool,
) -> LyapunovValue {
    let potential = oracle.value(&state.x) - f_star;
    let kinetic = 0.5 * state.p.iter().map(|p| p * p).sum::<f64>();
    let friction = state
        .xi
        .as_deref()
        .map_or(0.0, |xi| 0.5 * rho * xi.iter().map(|v| v * v).sum::<f64>());
    LyapunovValue {
        g: potential + kinetic + friction,
        potential,
        kinetic,
        friction,
        approximate,
    }
}

/// Lyapunov value using the oracle's `f*`. Without one the current value is
/// used as the reference and the result is flagged approximate.
pub fn lyapunov_g(state: &OptState, oracle: &dyn GradientOracle, rho: f64) -> LyapunovValue {
    match oracle.min_value() {
        Some(m) => lyapunov_with_reference(state, oracle, rho, m, false),
        None => lyapunov_with_reference(state, oracle, rho, oracle.value(&state.x), true),
    }
}

/// `G` along a sequence of states. Without a known `f*` the running minimum
/// over the whole sequence is used and every entry is flagged approximate.
pub fn lyapunov_series(
    states: &[OptState],
    oracle: &dyn GradientOracle,
    rho: f64,
) -> Vec<LyapunovValue> {
    match oracle.min_value() {
        Some(m) => states
            .iter()
            .map(|s| lyapunov_with_reference(s, oracle, rho, m, false))
            .collect(),
        None => {
            let best = states
                .iter()
                .map(|s| oracle.value(&s.x))
                .fold(f64::INFINITY, f64::min);
            states
                .iter()
                .map(|s| lyapunov_with_reference(s, oracle, rho, best, true))
                .collect()
        }
    }
}
