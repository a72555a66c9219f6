//! CSV artifacts.
//!
//! Floats are written in shortest round-trip form, so identical runs give
//! byte-identical files.

use std::collections::BTreeMap;
use std::io;

use kinopt::Trajectory;

use crate::run::{EnsembleResult, GridCell, PortraitCell, RunStatus, SummaryRow};
use crate::HarnessError;

pub const SUMMARY_COLUMNS: [&str; 15] = [
    "spec_id",
    "optimizer",
    "gamma",
    "dt",
    "alpha",
    "rho",
    "c",
    "seed",
    "final_loss",
    "best_loss",
    "kappa",
    "r2",
    "converged",
    "diverged_at",
    "wall_ms",
];

fn f(v: f64) -> String {
    format!("{v:?}")
}

fn of(v: Option<f64>) -> String {
    v.map(f).unwrap_or_default()
}

impl SummaryRow {
    pub fn record(&self) -> Vec<String> {
        vec![
            self.spec_id.clone(),
            self.optimizer.to_string(),
            of(self.gamma),
            f(self.dt),
            of(self.alpha),
            of(self.rho),
            of(self.c),
            self.seed.to_string(),
            of(self.final_loss),
            of(self.best_loss),
            of(self.kappa),
            of(self.r2),
            self.converged.to_string(),
            match self.status {
                RunStatus::Completed => String::new(),
                RunStatus::Diverged(k) => k.to_string(),
                RunStatus::Invalid => "invalid".into(),
            },
            self.wall_ms.map(|w| format!("{w:.3}")).unwrap_or_default(),
        ]
    }
}

/// Rows are sorted by `spec_id` before writing.
pub fn write_summary<W: io::Write>(w: W, rows: &[SummaryRow]) -> Result<(), HarnessError> {
    let mut rows: Vec<&SummaryRow> = rows.iter().collect();
    rows.sort_by(|a, b| a.spec_id.cmp(&b.spec_id));
    let mut out = csv::Writer::from_writer(w);
    out.write_record(SUMMARY_COLUMNS)?;
    for r in rows {
        out.write_record(r.record())?;
    }
    out.flush()?;
    Ok(())
}

/// `step, time, loss, p_norm, xi_norm, x_0..`; position columns are filled on
/// rows where a state sample was taken.
pub fn write_trajectory<W: io::Write>(w: W, traj: &Trajectory) -> Result<(), HarnessError> {
    let n = traj.final_state.dim();
    let with_state = traj.sample_stride.is_some();
    let mut header: Vec<String> = ["step", "time", "loss", "p_norm", "xi_norm"]
        .map(String::from)
        .to_vec();
    if with_state {
        header.extend((0..n).map(|i| format!("x_{i}")));
    }
    let mut rows: BTreeMap<u64, (Option<usize>, Option<usize>)> = BTreeMap::new();
    for (i, s) in traj.steps.iter().enumerate() {
        rows.entry(*s).or_default().0 = Some(i);
    }
    for (i, s) in traj.samples.iter().enumerate() {
        rows.entry(s.step_count).or_default().1 = Some(i);
    }
    let mut out = csv::Writer::from_writer(w);
    out.write_record(&header)?;
    for (step, (rec, sample)) in rows {
        let mut r = vec![step.to_string(), f(step as f64 * traj.dt)];
        match rec {
            Some(i) => {
                r.push(f(traj.losses[i]));
                r.push(f(traj.p_norms[i]));
                r.push(traj.xi_norms.as_ref().map(|v| f(v[i])).unwrap_or_default());
            }
            None => r.extend([String::new(), String::new(), String::new()]),
        }
        if with_state {
            match sample {
                Some(i) => r.extend(traj.samples[i].x.iter().map(|v| f(*v))),
                None => r.extend(std::iter::repeat_n(String::new(), n)),
            }
        }
        out.write_record(&r)?;
    }
    out.flush()?;
    Ok(())
}

/// Positions read back from a trajectory CSV: `(sample steps, rows)`.
pub fn read_trajectory_samples<R: io::Read>(
    r: R,
) -> Result<(Vec<u64>, Vec<Vec<f64>>), HarnessError> {
    let mut rdr = csv::Reader::from_reader(r);
    let header = rdr.headers()?.clone();
    let step_col = header
        .iter()
        .position(|h| h == "step")
        .ok_or_else(|| HarnessError::Config("no `step` column".into()))?;
    let x_cols: Vec<usize> = header
        .iter()
        .enumerate()
        .filter(|(_, h)| h.starts_with("x_"))
        .map(|(i, _)| i)
        .collect();
    if x_cols.is_empty() {
        return Err(HarnessError::Config(
            "trajectory has no state columns".into(),
        ));
    }
    let (mut steps, mut xs) = (Vec::new(), Vec::new());
    for rec in rdr.records() {
        let rec = rec?;
        if rec.get(x_cols[0]).unwrap_or("").is_empty() {
            continue;
        }
        let parse = |i: usize| -> Result<f64, HarnessError> {
            rec.get(i)
                .unwrap_or("")
                .parse::<f64>()
                .map_err(|e| HarnessError::Config(format!("bad value in column {i}: {e}")))
        };
        steps.push(
            rec.get(step_col)
                .unwrap_or("")
                .parse::<u64>()
                .map_err(|e| HarnessError::Config(format!("bad step: {e}")))?,
        );
        xs.push(
            x_cols
                .iter()
                .map(|&i| parse(i))
                .collect::<Result<Vec<_>, _>>()?,
        );
    }
    Ok((steps, xs))
}

/// `gamma_index, dt_index, gamma, dt, status, metric, spec_id`
pub fn write_grid<W: io::Write>(w: W, cells: &[GridCell]) -> Result<(), HarnessError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "gamma_index",
        "dt_index",
        "gamma",
        "dt",
        "status",
        "metric",
        "spec_id",
    ])?;
    let mut cells: Vec<&GridCell> = cells.iter().collect();
    cells.sort_by_key(|c| (c.gamma_index, c.dt_index));
    for c in cells {
        let status = match c.summary.status {
            RunStatus::Completed => "ok",
            RunStatus::Diverged(_) => "diverged",
            RunStatus::Invalid => "invalid",
        };
        out.write_record([
            c.gamma_index.to_string(),
            c.dt_index.to_string(),
            f(c.gamma),
            f(c.dt),
            status.to_string(),
            of(c.metric),
            c.summary.spec_id.clone(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Per-cell metrics: `spec_id, i, j, x0_0, x0_1, converged, overshoot_count, path_ratio, final_distance`.
pub fn write_portrait<W: io::Write>(w: W, cells: &[PortraitCell]) -> Result<(), HarnessError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "spec_id",
        "i",
        "j",
        "x0_0",
        "x0_1",
        "converged",
        "overshoot_count",
        "path_ratio",
        "final_distance",
    ])?;
    let mut cells: Vec<&PortraitCell> = cells.iter().collect();
    cells.sort_by_key(|c| c.index);
    for c in cells {
        let m = &c.metrics;
        out.write_record([
            c.summary.spec_id.clone(),
            c.index.0.to_string(),
            c.index.1.to_string(),
            f(c.x0[0]),
            f(c.x0[1]),
            m.converged.to_string(),
            m.overshoot_count.to_string(),
            f(m.path_ratio),
            f(m.final_distance),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Polylines: `spec_id, step, x_0, x_1`.
pub fn write_paths<W: io::Write>(w: W, cells: &[PortraitCell]) -> Result<(), HarnessError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["spec_id", "step", "x_0", "x_1"])?;
    let mut cells: Vec<&PortraitCell> = cells.iter().collect();
    cells.sort_by_key(|c| c.index);
    for c in cells {
        for (step, x) in &c.path {
            out.write_record([
                c.summary.spec_id.clone(),
                step.to_string(),
                f(x[0]),
                f(x[1]),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// `metric, mean, std, n`
pub fn write_ensemble_stats<W: io::Write>(w: W, e: &EnsembleResult) -> Result<(), HarnessError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["metric", "mean", "std", "n"])?;
    for (name, s) in &e.stats {
        match s {
            Some(s) => {
                out.write_record([name.to_string(), f(s.mean), f(s.std), s.n.to_string()])?
            }
            None => {
                out.write_record([name.to_string(), String::new(), String::new(), "0".into()])?
            }
        }
    }
    out.flush()?;
    Ok(())
}

/// `step, time, mean_loss, std_loss`
pub fn write_mean_curve<W: io::Write>(w: W, e: &EnsembleResult) -> Result<(), HarnessError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["step", "time", "mean_loss", "std_loss"])?;
    for k in 0..e.steps.len() {
        out.write_record([
            e.steps[k].to_string(),
            f(e.times[k]),
            f(e.mean_loss[k]),
            f(e.std_loss[k]),
        ])?;
    }
    out.flush()?;
    Ok(())
}
