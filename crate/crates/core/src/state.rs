//! Optimizer state, hyperparameters and optimizer identifiers.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Denominator guard used by CADAM and the Adam baseline when none is given.
pub const DEFAULT_EPS_DIV: f64 = 1e-8;

/// Which update rule drives a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OptimizerKind {
    /// Adaptive per-coordinate friction, composed as C, D, B, A.
    IkfadSplit,
    /// Cubic damping, composed as C', D', B, A.
    CdSplit,
    /// Cubic damping, explicit Euler.
    CdEuler,
    /// Cubically damped continuous Adam, composed as C', D', B, A', E.
    CadamSplit,
    /// Linear friction only, composed as D', B, A.
    LdhdSplit,
    /// Classical heavy-ball momentum in accumulated-gradient form.
    MsgdEuler,
    /// Standard Adam with bias correction.
    AdamBaseline,
}

impl OptimizerKind {
    pub const ALL: [OptimizerKind; 7] = [
        OptimizerKind::IkfadSplit,
        OptimizerKind::CdSplit,
        OptimizerKind::CdEuler,
        OptimizerKind::CadamSplit,
        OptimizerKind::LdhdSplit,
        OptimizerKind::MsgdEuler,
        OptimizerKind::AdamBaseline,
    ];

    pub fn uses_xi(self) -> bool {
        matches!(self, OptimizerKind::IkfadSplit)
    }

    pub fn uses_zeta(self) -> bool {
        matches!(
            self,
            OptimizerKind::CadamSplit | OptimizerKind::AdamBaseline
        )
    }

    /// Short identifier used in spec files and CSV output.
    pub fn as_str(self) -> &'static str {
        match self {
            OptimizerKind::IkfadSplit => "ikfad",
            OptimizerKind::CdSplit => "cd",
            OptimizerKind::CdEuler => "cd_euler",
            OptimizerKind::CadamSplit => "cadam",
            OptimizerKind::LdhdSplit => "ldhd",
            OptimizerKind::MsgdEuler => "msgd",
            OptimizerKind::AdamBaseline => "adam",
        }
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        OptimizerKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown optimizer `{s}`")))
    }
}

/// Evolving optimizer state.
///
/// For the Adam baseline `p` holds the first-moment estimate and `zeta` the
/// second-moment estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct OptState {
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    pub xi: Option<Vec<f64>>,
    pub zeta: Option<Vec<f64>>,
    pub step_count: u64,
}

impl OptState {
    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn is_finite(&self) -> bool {
        let all = |v: &[f64]| v.iter().all(|a| a.is_finite());
        all(&self.x)
            && all(&self.p)
            && self.xi.as_deref().is_none_or(all)
            && self.zeta.as_deref().is_none_or(all)
    }

    pub fn p_norm(&self) -> f64 {
        norm(&self.p)
    }

    pub fn xi_norm(&self) -> Option<f64> {
        self.xi.as_deref().map(norm)
    }

    pub fn xi(&self) -> Result<&[f64]> {
        self.xi
            .as_deref()
            .ok_or(Error::MissingAuxiliary { which: "xi" })
    }

    pub fn zeta(&self) -> Result<&[f64]> {
        self.zeta
            .as_deref()
            .ok_or(Error::MissingAuxiliary { which: "zeta" })
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Builds an initial state, validating dimensions and auxiliary requirements.
///
/// Auxiliaries needed by `kind` but not supplied start at zero.
pub fn init_state(
    kind: OptimizerKind,
    x0: Vec<f64>,
    p0: Vec<f64>,
    xi0: Option<Vec<f64>>,
    zeta0: Option<Vec<f64>>,
) -> Result<OptState> {
    let n = x0.len();
    if n == 0 {
        return Err(Error::EmptyState);
    }
    check_dim(n, p0.len())?;

    let aux =
        |which: &'static str, given: Option<Vec<f64>>, used: bool| -> Result<Option<Vec<f64>>> {
            match given {
                Some(_) if !used => Err(Error::UnexpectedAuxiliary { which, kind }),
                Some(v) => {
                    check_dim(n, v.len())?;
                    if let Some((index, &value)) = v.iter().enumerate().find(|(_, a)| !(**a >= 0.0))
                    {
                        return Err(Error::NegativeAuxiliary {
                            which,
                            index,
                            value,
                        });
                    }
                    Ok(Some(v))
                }
                None if used => Ok(Some(vec![0.0; n])),
                None => Ok(None),
            }
        };

    Ok(OptState {
        xi: aux("xi", xi0, kind.uses_xi())?,
        zeta: aux("zeta", zeta0, kind.uses_zeta())?,
        x: x0,
        p: p0,
        step_count: 0,
    })
}

/// Zero momentum and zero auxiliaries at `x0`.
pub fn rest_state(kind: OptimizerKind, x0: Vec<f64>) -> Result<OptState> {
    let n = x0.len();
    init_state(kind, x0, vec![0.0; n], None, None)
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

/// Step size and coefficients. Only `dt` is always required; every other
/// field is checked for presence by the optimizer that reads it.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperParams {
    pub dt: f64,
    pub gamma: Option<f64>,
    pub alpha: Option<f64>,
    pub rho: Option<f64>,
    pub c: Option<f64>,
    pub eps_div: Option<f64>,
    pub mu: Option<f64>,
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
}

impl HyperParams {
    /// Only `dt` and the documented `eps_div` default are set.
    pub fn new(dt: f64) -> Self {
        HyperParams {
            dt,
            gamma: None,
            alpha: None,
            rho: None,
            c: None,
            eps_div: Some(DEFAULT_EPS_DIV),
            mu: None,
            beta1: None,
            beta2: None,
        }
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = Some(gamma);
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = Some(alpha);
        self
    }

    pub fn with_rho(mut self, rho: f64) -> Self {
        self.rho = Some(rho);
        self
    }

    pub fn with_c(mut self, c: f64) -> Self {
        self.c = Some(c);
        self
    }

    pub fn with_eps_div(mut self, eps: f64) -> Self {
        self.eps_div = Some(eps);
        self
    }

    pub fn with_mu(mut self, mu: f64) -> Self {
        self.mu = Some(mu);
        self
    }

    pub fn with_betas(mut self, beta1: f64, beta2: f64) -> Self {
        self.beta1 = Some(beta1);
        self.beta2 = Some(beta2);
        self
    }

    pub fn dt(&self) -> Result<f64> {
        positive("dt", self.dt)
    }

    pub fn gamma(&self, kind: OptimizerKind) -> Result<f64> {
        non_negative("gamma", need(self.gamma, "gamma", kind)?)
    }

    pub fn alpha(&self, kind: OptimizerKind) -> Result<f64> {
        positive("alpha", need(self.alpha, "alpha", kind)?)
    }

    pub fn rho(&self, kind: OptimizerKind) -> Result<f64> {
        positive("rho", need(self.rho, "rho", kind)?)
    }

    pub fn c(&self, kind: OptimizerKind) -> Result<f64> {
        non_negative("c", need(self.c, "c", kind)?)
    }

    pub fn eps_div(&self, kind: OptimizerKind) -> Result<f64> {
        positive("eps_div", need(self.eps_div, "eps_div", kind)?)
    }

    pub fn mu(&self, kind: OptimizerKind) -> Result<f64> {
        unit_interval("mu", need(self.mu, "mu", kind)?)
    }

    pub fn beta1(&self, kind: OptimizerKind) -> Result<f64> {
        unit_interval("beta1", need(self.beta1, "beta1", kind)?)
    }

    pub fn beta2(&self, kind: OptimizerKind) -> Result<f64> {
        unit_interval("beta2", need(self.beta2, "beta2", kind)?)
    }

    /// Checks that every field `kind` reads is present and in range.
    /// `scheduled` skips the `mu` requirement for scheduled mSGD.
    pub fn validate_for(&self, kind: OptimizerKind, scheduled: bool) -> Result<()> {
        self.dt()?;
        match kind {
            OptimizerKind::IkfadSplit => {
                self.gamma(kind)?;
                self.alpha(kind)?;
                self.rho(kind)?;
            }
            OptimizerKind::CdSplit | OptimizerKind::CdEuler => {
                self.gamma(kind)?;
                self.c(kind)?;
            }
            OptimizerKind::CadamSplit => {
                self.gamma(kind)?;
                self.c(kind)?;
                self.alpha(kind)?;
                self.eps_div(kind)?;
            }
            OptimizerKind::LdhdSplit => {
                self.gamma(kind)?;
            }
            OptimizerKind::MsgdEuler => {
                if !scheduled {
                    self.mu(kind)?;
                }
            }
            OptimizerKind::AdamBaseline => {
                self.beta1(kind)?;
                self.beta2(kind)?;
                self.eps_div(kind)?;
            }
        }
        Ok(())
    }
}

fn need(v: Option<f64>, name: &'static str, kind: OptimizerKind) -> Result<f64> {
    v.ok_or(Error::MissingHyperParam { name, kind })
}

fn positive(name: &'static str, value: f64) -> Result<f64> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(Error::InvalidHyperParam {
            name,
            value,
            reason: "must be positive and finite",
        })
    }
}

fn non_negative(name: &'static str, value: f64) -> Result<f64> {
    if value >= 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(Error::InvalidHyperParam {
            name,
            value,
            reason: "must be non-negative and finite",
        })
    }
}

fn unit_interval(name: &'static str, value: f64) -> Result<f64> {
    if (0.0..1.0).contains(&value) {
        Ok(value)
    } else {
        Err(Error::InvalidHyperParam {
            name,
            value,
            reason: "must lie in [0, 1)",
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ikfad_defaults_xi_to_zero() {
        let s = init_state(
            OptimizerKind::IkfadSplit,
            vec![1.0, 1.0],
            vec![0.0, 0.0],
            None,
            None,
        )
        .unwrap();
        assert_eq!(s.xi, Some(vec![0.0, 0.0]));
        assert_eq!(s.zeta, None);
        assert_eq!(s.step_count, 0);
    }

    #[test]
    fn cd_has_no_auxiliaries() {
        let s = init_state(OptimizerKind::CdSplit, vec![1.0], vec![2.0], None, None).unwrap();
        assert_eq!(s.x, vec![1.0]);
        assert_eq!(s.p, vec![2.0]);
        assert!(s.xi.is_none() && s.zeta.is_none());
    }

    #[test]
    fn negative_xi_rejected() {
        let err = init_state(
            OptimizerKind::IkfadSplit,
            vec![1.0],
            vec![0.0],
            Some(vec![-1.0]),
            None,
        );
        assert!(matches!(
            err,
            Err(Error::NegativeAuxiliary { which: "xi", .. })
        ));
    }

    #[test]
    fn nan_aux_rejected() {
        let err = init_state(
            OptimizerKind::CadamSplit,
            vec![1.0],
            vec![0.0],
            None,
            Some(vec![f64::NAN]),
        );
        assert!(matches!(
            err,
            Err(Error::NegativeAuxiliary { which: "zeta", .. })
        ));
    }

    #[test]
    fn mismatched_dimensions_rejected() {
        let err = init_state(
            OptimizerKind::CdSplit,
            vec![1.0, 2.0],
            vec![0.0],
            None,
            None,
        );
        assert_eq!(
            err,
            Err(Error::DimensionMismatch {
                expected: 2,
                found: 1
            })
        );
        let err = init_state(
            OptimizerKind::IkfadSplit,
            vec![1.0],
            vec![0.0],
            Some(vec![0.0, 0.0]),
            None,
        );
        assert!(matches!(err, Err(Error::DimensionMismatch { .. })));
        assert_eq!(
            init_state(OptimizerKind::CdSplit, vec![], vec![], None, None),
            Err(Error::EmptyState)
        );
    }

    #[test]
    fn unused_auxiliary_rejected() {
        let err = init_state(
            OptimizerKind::CdSplit,
            vec![1.0],
            vec![0.0],
            Some(vec![0.0]),
            None,
        );
        assert!(matches!(
            err,
            Err(Error::UnexpectedAuxiliary { which: "xi", .. })
        ));
        let err = init_state(
            OptimizerKind::IkfadSplit,
            vec![1.0],
            vec![0.0],
            None,
            Some(vec![0.0]),
        );
        assert!(matches!(
            err,
            Err(Error::UnexpectedAuxiliary { which: "zeta", .. })
        ));
    }

    #[test]
    fn missing_hyperparams_are_reported_not_defaulted() {
        let hp = HyperParams::new(0.1).with_gamma(1.0);
        assert_eq!(
            hp.validate_for(OptimizerKind::IkfadSplit, false),
            Err(Error::MissingHyperParam {
                name: "alpha",
                kind: OptimizerKind::IkfadSplit
            })
        );
        assert!(hp.validate_for(OptimizerKind::LdhdSplit, false).is_ok());
        assert!(HyperParams::new(0.1)
            .validate_for(OptimizerKind::MsgdEuler, true)
            .is_ok());
        assert!(HyperParams::new(0.1)
            .validate_for(OptimizerKind::MsgdEuler, false)
            .is_err());
    }

    #[test]
    fn hyperparam_ranges() {
        assert!(HyperParams::new(0.0).dt().is_err());
        assert!(HyperParams::new(0.1)
            .with_mu(1.0)
            .mu(OptimizerKind::MsgdEuler)
            .is_err());
        assert!(HyperParams::new(0.1)
            .with_gamma(-0.1)
            .gamma(OptimizerKind::LdhdSplit)
            .is_err());
        assert!(HyperParams::new(0.1)
            .with_rho(0.0)
            .rho(OptimizerKind::IkfadSplit)
            .is_err());
    }

    #[test]
    fn kind_names_round_trip() {
        for k in OptimizerKind::ALL {
            assert_eq!(k.as_str().parse::<OptimizerKind>().unwrap(), k);
        }
        assert!("sgd".parse::<OptimizerKind>().is_err());
    }
}
