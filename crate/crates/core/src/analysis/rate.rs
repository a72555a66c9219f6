use std::fmt;
use std::ops::Range;

use crate::error::{Error, Result};
use crate::trajectory::Trajectory;

/// Minimum number of strictly positive samples a fit needs.
pub const MIN_FIT_SAMPLES: usize = 10;

/// Least-squares fit of `log y = log_intercept - kappa t`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    pub kappa: f64,
    pub log_intercept: f64,
    pub r_squared: f64,
    /// Index range of the trailing window.
    pub window: Range<usize>,
    /// Positive samples actually used.
    pub n_used: usize,
}

impl RateFit {
    /// `C e^{-kappa t}`
    pub fn envelope(&self, t: f64) -> f64 {
        (self.log_intercept - self.kappa * t).exp()
    }
}

impl fmt::Display for RateFit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "kappa={:.6} log_C={:.6} r2={:.6} window={}..{} n={}",
            self.kappa,
            self.log_intercept,
            self.r_squared,
            self.window.start,
            self.window.end,
            self.n_used
        )
    }
}

/// Fits an exponential decay to the trailing `tail_fraction` of `(times, values)`.
/// Non-positive values in the window are skipped.
pub fn fit_rate_series(times: &[f64], values: &[f64], tail_fraction: f64) -> Result<RateFit> {
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "tail_fraction {tail_fraction} not in (0, 1]"
        )));
    }
    if times.len() != values.len() {
        return Err(Error::DimensionMismatch {
            expected: times.len(),
            found: values.len(),
        });
    }
    let n = values.len();
    let take = ((n as f64 * tail_fraction).ceil() as usize).min(n);
    let window = n - take..n;
    let pts: Vec<(f64, f64)> = window
        .clone()
        .filter(|&i| values[i] > 0.0 && values[i].is_finite())
        .map(|i| (times[i], values[i].ln()))
        .collect();
    if pts.len() < MIN_FIT_SAMPLES {
        return Err(Error::InsufficientSamples {
            needed: MIN_FIT_SAMPLES,
            found: pts.len(),
        });
    }
    let m = pts.len() as f64;
    let tbar = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let ybar = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let stt: f64 = pts.iter().map(|p| (p.0 - tbar).powi(2)).sum();
    let sty: f64 = pts.iter().map(|p| (p.0 - tbar) * (p.1 - ybar)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - ybar).powi(2)).sum();
    let slope = if stt > 0.0 { sty / stt } else { 0.0 };
    let intercept = ybar - slope * tbar;
    let r_squared = if syy > 0.0 && stt > 0.0 {
        let ss_res: f64 = pts
            .iter()
            .map(|p| (p.1 - intercept - slope * p.0).powi(2))
            .sum();
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    } else {
        0.0
    };
    Ok(RateFit {
        kappa: -slope,
        log_intercept: intercept,
        r_squared,
        window,
        n_used: pts.len(),
    })
}

/// Fits `loss + ||p||^2 + ||xi||^2` over the trailing window of `traj`.
pub fn fit_exponential_rate(traj: &Trajectory, tail_fraction: f64) -> Result<RateFit> {
    fit_rate_series(&traj.times, &traj.energy_sum(), tail_fraction)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_exponential() {
        let dt = 0.01;
        let t: Vec<f64> = (0..1000).map(|n| n as f64 * dt).collect();
        let y: Vec<f64> = t.iter().map(|t| (-2.0 * t).exp()).collect();
        let fit = fit_rate_series(&t, &y, 1.0).unwrap();
        assert!((fit.kappa - 2.0).abs() < 1e-6);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        assert!(fit.log_intercept.abs() < 1e-9);
    }

    #[test]
    fn constant_has_no_decay() {
        let t: Vec<f64> = (0..50).map(f64::from).collect();
        let fit = fit_rate_series(&t, &[3.0; 50], 0.5).unwrap();
        assert_eq!(fit.kappa, 0.0);
        assert_eq!(fit.r_squared, 0.0);
        assert_eq!(fit.window, 25..50);
    }

    #[test]
    fn too_few_positive_samples() {
        let t: Vec<f64> = (0..20).map(f64::from).collect();
        let mut y = vec![0.0; 20];
        y[..5].iter_mut().for_each(|v| *v = 1.0);
        assert!(matches!(
            fit_rate_series(&t, &y, 1.0),
            Err(Error::InsufficientSamples {
                needed: 10,
                found: 5
            })
        ));
        assert!(fit_rate_series(&t, &y, 0.0).is_err());
    }
}
