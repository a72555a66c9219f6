use std::fmt;
use std::io;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::state::check_dim;
use crate::trajectory::Trajectory;

pub const MIN_SPECTRUM_SAMPLES: usize = 8;

/// One-sided power spectrum of a mean-removed signal.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumReport {
    /// Cycles per optimizer step.
    pub frequencies: Vec<f64>,
    /// In squared signal units; may overflow to infinity for huge signals.
    pub power: Vec<f64>,
    /// Largest non-DC bin over total non-DC power; 0 for a flat signal.
    pub peak_ratio: f64,
    pub peak_frequency: f64,
    /// Samples used after truncation to a power of two.
    pub n_used: usize,
    pub n_input: usize,
}

impl SpectrumReport {
    pub fn total_power(&self) -> f64 {
        self.power.iter().sum()
    }

    /// Columns `frequency,power`.
    pub fn write_csv<W: io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["frequency", "power"])?;
        for (f, p) in self.frequencies.iter().zip(&self.power) {
            out.write_record([format!("{f:?}"), format!("{p:?}")])?;
        }
        out.flush().map_err(|e| Error::Dataset(e.to_string()))
    }
}

impl fmt::Display for SpectrumReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "peak_ratio={:.6} peak_frequency={:.6} bins={} samples={}/{}",
            self.peak_ratio,
            self.peak_frequency,
            self.power.len(),
            self.n_used,
            self.n_input
        )
    }
}

/// Spectrum of `signal` sampled every `stride` steps. Only the first
/// power-of-two samples are used.
pub fn power_spectrum(signal: &[f64], stride: u64) -> Result<SpectrumReport> {
    if signal.len() < MIN_SPECTRUM_SAMPLES {
        return Err(Error::InsufficientSamples {
            needed: MIN_SPECTRUM_SAMPLES,
            found: signal.len(),
        });
    }
    if stride == 0 {
        return Err(Error::InvalidArgument("stride must be positive".into()));
    }
    if let Some(bad) = signal.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("non-finite sample {bad}")));
    }
    let n = 1usize << signal.len().ilog2();
    let s = &signal[..n];
    // Work on a unit-scale copy so huge (pre-divergence) signals cannot overflow.
    let scale = s.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let mean = s.iter().map(|v| v / scale).sum::<f64>() / n as f64;
    let mut buf: Vec<Complex<f64>> = s
        .iter()
        .map(|v| Complex::new(v / scale - mean, 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);

    let nn = (n * n) as f64;
    let half = n / 2;
    // One-sided power of the unit-scale signal; ratios are taken here.
    let unit: Vec<f64> = (0..=half)
        .map(|k| {
            let p = buf[k].norm_sqr() / nn;
            if k == 0 || k == half {
                p
            } else {
                2.0 * p
            }
        })
        .collect();
    let power: Vec<f64> = unit.iter().map(|p| p * scale * scale).collect();
    let frequencies = (0..=half)
        .map(|k| k as f64 / (n as f64 * stride as f64))
        .collect::<Vec<_>>();
    let non_dc: f64 = unit[1..].iter().sum();
    let (peak_k, peak) =
        unit.iter().enumerate().skip(1).fold(
            (0, 0.0),
            |best, (k, &p)| if p > best.1 { (k, p) } else { best },
        );
    let peak_ratio = if non_dc > 0.0 { peak / non_dc } else { 0.0 };
    Ok(SpectrumReport {
        peak_frequency: frequencies[peak_k],
        frequencies,
        power,
        peak_ratio,
        n_used: n,
        n_input: signal.len(),
    })
}

/// Projection of the sampled positions onto `direction`.
pub fn project_samples(traj: &Trajectory, direction: &[f64]) -> Result<Vec<f64>> {
    traj.samples
        .iter()
        .map(|s| {
            check_dim(direction.len(), s.dim())?;
            Ok(s.x.iter().zip(direction).map(|(a, b)| a * b).sum())
        })
        .collect()
}

/// Spectrum of the trajectory projected onto the unit vector `direction`.
pub fn trajectory_spectrum(traj: &Trajectory, direction: &[f64]) -> Result<SpectrumReport> {
    let norm = direction.iter().map(|a| a * a).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "direction must have unit norm, has {norm}"
        )));
    }
    let stride = traj
        .sample_stride
        .ok_or_else(|| Error::InvalidArgument("trajectory has no state samples".into()))?;
    power_spectrum(&project_samples(traj, direction)?, stride)
}
