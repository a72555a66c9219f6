use std::fmt;

use crate::error::{Error, Result};
use crate::state::check_dim;
use crate::trajectory::Trajectory;

/// Oscillation summary of one trajectory around a known minimizer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PortraitMetrics {
    pub converged: bool,
    pub overshoot_count: u64,
    /// Arc length over the initial distance to the minimizer.
    pub path_ratio: f64,
    pub final_distance: f64,
}

impl fmt::Display for PortraitMetrics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "converged={} overshoots={} path_ratio={:.4} final_distance={:.3e}",
            self.converged, self.overshoot_count, self.path_ratio, self.final_distance
        )
    }
}

/// Streaming version of [`phase_portrait_metrics`], fed one position at a time.
#[derive(Debug, Clone)]
pub struct PortraitTracker {
    x_star: Vec<f64>,
    tol: f64,
    start_distance: Option<f64>,
    prev: Option<Vec<f64>>,
    arc: f64,
    entered: bool,
    signs: Vec<i8>,
    overshoots: u64,
    last_distance: f64,
}

/// Deviations within `OVERSHOOT_DEADBAND * max(1, |x*_i|)` carry no sign, so
/// rounding-level jitter around the minimizer is not counted as overshoot.
pub const OVERSHOOT_DEADBAND: f64 = 1e-12;

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(u, v)| (u - v) * (u - v))
        .sum::<f64>()
        .sqrt()
}

impl PortraitTracker {
    pub fn new(x_star: &[f64], tol: f64) -> Self {
        PortraitTracker {
            x_star: x_star.to_vec(),
            tol,
            start_distance: None,
            prev: None,
            arc: 0.0,
            entered: false,
            signs: vec![0; x_star.len()],
            overshoots: 0,
            last_distance: f64::NAN,
        }
    }

    pub fn observe(&mut self, x: &[f64]) {
        let d = dist(x, &self.x_star);
        self.start_distance.get_or_insert(d);
        if let Some(prev) = self.prev.as_mut() {
            self.arc += dist(prev, x);
            prev.copy_from_slice(x);
        } else {
            self.prev = Some(x.to_vec());
        }
        self.last_distance = d;
        if !self.entered && d < 10.0 * self.tol {
            self.entered = true;
        }
        if !self.entered {
            return;
        }
        for ((s, xi), xs) in self.signs.iter_mut().zip(x).zip(&self.x_star) {
            let band = OVERSHOOT_DEADBAND * xs.abs().max(1.0);
            let e = xi - xs;
            let sign = if e > band {
                1
            } else if e < -band {
                -1
            } else {
                0
            };
            if sign != 0 {
                if *s != 0 && sign != *s {
                    self.overshoots += 1;
                }
                *s = sign;
            }
        }
    }

    pub fn finish(&self) -> PortraitMetrics {
        let d0 = self.start_distance.unwrap_or(0.0);
        let path_ratio = if d0 > 0.0 {
            self.arc / d0
        } else if self.arc == 0.0 {
            1.0
        } else {
            f64::INFINITY
        };
        PortraitMetrics {
            converged: self.last_distance < self.tol,
            overshoot_count: self.overshoots,
            path_ratio,
            final_distance: self.last_distance,
        }
    }
}

/// Convergence, overshoot and path-length metrics over the state samples.
pub fn phase_portrait_metrics(
    traj: &Trajectory,
    x_star: &[f64],
    tol: f64,
) -> Result<PortraitMetrics> {
    if traj.samples.is_empty() {
        return Err(Error::InvalidArgument(
            "trajectory has no state samples".into(),
        ));
    }
    let mut t = PortraitTracker::new(x_star, tol);
    for s in &traj.samples {
        check_dim(x_star.len(), s.dim())?;
        t.observe(&s.x);
    }
    Ok(t.finish())
}
