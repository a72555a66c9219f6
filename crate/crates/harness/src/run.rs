//! Single runs, grids, portraits and seed ensembles.

use std::time::Instant;

use rayon::prelude::*;

use kinopt::analysis::{
    fit_exponential_rate, trajectory_spectrum, PortraitMetrics, PortraitTracker, SpectrumReport,
};
use kinopt::optimizers::msgd_equivalent;
use kinopt::oracle::mix_seed;
use kinopt::trajectory::reported_loss;
use kinopt::{integrate_with, MomentumSchedule, OptimizerKind, RecordOptions, Trajectory};

use crate::problem::{initial_state, Problem};
use crate::spec::{
    lattice_point, EnsembleSpec, GridMetric, GridSpec, Output, PortraitSpec, RunSpec, X0Spec,
};
use crate::HarnessError;

/// Execution settings that are not part of a spec.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Exec {
    /// Fill `wall_ms`; off by default so summaries are byte-reproducible.
    pub timing: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Completed,
    Diverged(u64),
    /// Not run: the hyperparameters are invalid for this optimizer.
    Invalid,
}

/// One row of `summary.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub spec_id: String,
    pub optimizer: OptimizerKind,
    pub gamma: Option<f64>,
    pub dt: f64,
    pub alpha: Option<f64>,
    pub rho: Option<f64>,
    pub c: Option<f64>,
    pub seed: u64,
    /// Infinite for diverged runs, absent for invalid ones.
    pub final_loss: Option<f64>,
    pub best_loss: Option<f64>,
    pub kappa: Option<f64>,
    pub r2: Option<f64>,
    pub converged: bool,
    pub status: RunStatus,
    pub wall_ms: Option<f64>,
}

impl SummaryRow {
    fn from_spec(spec: &RunSpec, status: RunStatus) -> Self {
        SummaryRow {
            spec_id: spec.spec_id.clone(),
            optimizer: spec.kind(),
            gamma: spec.hp.gamma,
            dt: spec.hp.dt,
            alpha: spec.hp.alpha,
            rho: spec.hp.rho,
            c: spec.hp.c,
            seed: spec.seed,
            final_loss: None,
            best_loss: None,
            kappa: None,
            r2: None,
            converged: false,
            status,
            wall_ms: None,
        }
    }

    pub fn diverged(&self) -> bool {
        matches!(self.status, RunStatus::Diverged(_))
    }
}

/// Everything produced by one run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub spec: RunSpec,
    pub trajectory: Trajectory,
    pub summary: SummaryRow,
    pub spectrum: Option<SpectrumReport>,
    pub portrait: Option<PortraitMetrics>,
    /// Positions at every recorded step, kept for portraits.
    pub path: Vec<(u64, Vec<f64>)>,
    pub test_accuracy: Option<f64>,
}

pub fn run_single(spec: &RunSpec) -> Result<RunOutcome, HarnessError> {
    execute(spec, Exec::default(), false)
}

pub fn run_single_with(spec: &RunSpec, exec: Exec) -> Result<RunOutcome, HarnessError> {
    execute(spec, exec, false)
}

fn execute(spec: &RunSpec, exec: Exec, keep_path: bool) -> Result<RunOutcome, HarnessError> {
    let problem = Problem::build(&spec.problem, spec.noise_sigma)?;
    let state = initial_state(spec, &problem)?;
    let oracle = problem.oracle.as_ref();
    let x_star = oracle.minimizer().map(<[f64]>::to_vec);
    let want_portrait = keep_path || spec.outputs.contains(&Output::PortraitCsv);
    let mut tracker = match (&x_star, want_portrait) {
        (Some(xs), true) => Some(PortraitTracker::new(xs, spec.tol)),
        (None, true) => {
            return Err(HarnessError::Config(
                "portrait metrics need a problem with a known minimizer".into(),
            ))
        }
        _ => None,
    };
    let mut path = Vec::new();
    let mut opts = RecordOptions::new(spec.steps).with_record_stride(spec.record_stride);
    if let Some(s) = spec.sample_stride {
        opts = opts.with_sample_stride(s);
    }
    let start = Instant::now();
    let traj = integrate_with(
        &spec.optimizer,
        &spec.hp,
        oracle,
        state,
        spec.seed,
        opts,
        |s| {
            if let Some(t) = tracker.as_mut() {
                t.observe(&s.x);
            }
            if keep_path && s.step_count % spec.record_stride == 0 {
                path.push((s.step_count, s.x.clone()));
            }
        },
    )?;
    let elapsed = start.elapsed();

    let status = match traj.diverged_at {
        Some(k) => RunStatus::Diverged(k),
        None => RunStatus::Completed,
    };
    let mut row = SummaryRow::from_spec(spec, status);
    let fin = &traj.final_state;
    let final_loss = reported_loss(oracle, &fin.x);
    row.final_loss = Some(if traj.diverged_at.is_some() {
        f64::INFINITY
    } else {
        final_loss
    });
    row.best_loss = traj.best_loss().map(|b| b.min(final_loss));
    if let Some(tail) = spec.fit_tail {
        if let Ok(fit) = fit_exponential_rate(&traj, tail) {
            row.kappa = Some(fit.kappa);
            row.r2 = Some(fit.r_squared);
        }
    }
    row.converged = traj.diverged_at.is_none()
        && match &x_star {
            Some(xs) => {
                fin.x
                    .iter()
                    .zip(xs)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt()
                    < spec.tol
            }
            None => {
                oracle
                    .gradient(&fin.x)
                    .iter()
                    .map(|g| g * g)
                    .sum::<f64>()
                    .sqrt()
                    < spec.tol
            }
        };
    if exec.timing {
        row.wall_ms = Some(elapsed.as_secs_f64() * 1e3);
    }

    let spectrum = if spec.outputs.contains(&Output::SpectrumCsv) {
        let dir = problem.direction(&spec.spectrum_direction)?;
        Some(trajectory_spectrum(&traj, &dir)?)
    } else {
        None
    };
    let test_accuracy = match (problem.toy(), traj.diverged_at) {
        (Some(t), None) => Some(t.test_accuracy(&fin.x)),
        _ => None,
    };
    Ok(RunOutcome {
        spec: spec.clone(),
        summary: row,
        trajectory: traj,
        spectrum,
        portrait: tracker.map(|t| t.finish()),
        path,
        test_accuracy,
    })
}

/// One `(gamma, dt)` cell of a grid.
#[derive(Debug, Clone)]
pub struct GridCell {
    pub gamma_index: usize,
    pub dt_index: usize,
    pub gamma: f64,
    pub dt: f64,
    /// Materialized spec; `None` for invalid cells.
    pub spec: Option<RunSpec>,
    pub summary: SummaryRow,
    pub metric: Option<f64>,
    pub test_accuracy: Option<f64>,
}

fn width(n: usize) -> usize {
    n.saturating_sub(1).to_string().len().max(2)
}

/// Materialized run for cell `(gi, di)`.
pub fn grid_cell_spec(grid: &GridSpec, gi: usize, di: usize) -> Result<RunSpec, kinopt::Error> {
    let (gamma, h) = (grid.gamma_values[gi], grid.dt_values[di]);
    let index = (gi * grid.dt_values.len() + di) as u64;
    let mut spec = grid.base.clone();
    let (wg, wd) = (width(grid.gamma_values.len()), width(grid.dt_values.len()));
    spec.spec_id = format!("{}.g{gi:0wg$}d{di:0wd$}", grid.base.spec_id);
    spec.seed = mix_seed(grid.base.seed, index);
    spec.hp.gamma = Some(gamma);
    if spec.kind() == OptimizerKind::MsgdEuler {
        let scheduled = !matches!(
            spec.optimizer.schedule,
            None | Some(MomentumSchedule::Constant)
        );
        let (mu, lr) = msgd_equivalent(gamma, h)?;
        spec.hp.dt = lr;
        if !scheduled {
            spec.hp.mu = Some(mu);
        }
    } else {
        spec.hp.dt = h;
    }
    spec.optimizer.validate(&spec.hp)?;
    Ok(spec)
}

fn metric_of(metric: GridMetric, out: &RunOutcome) -> Option<f64> {
    match metric {
        GridMetric::FinalLoss => out.summary.final_loss,
        GridMetric::BestLoss => out.summary.best_loss,
        GridMetric::TestAccuracyProxy => out.test_accuracy,
    }
}

/// Runs every cell of the Cartesian product in parallel. Cells are returned
/// in row-major `(gamma, dt)` order; failures are recorded, never dropped.
pub fn run_gamma_dt_grid(grid: &GridSpec, exec: Exec) -> Vec<GridCell> {
    let cells: Vec<(usize, usize)> = (0..grid.gamma_values.len())
        .flat_map(|g| (0..grid.dt_values.len()).map(move |d| (g, d)))
        .collect();
    cells
        .into_par_iter()
        .map(|(gi, di)| {
            let (gamma, dt) = (grid.gamma_values[gi], grid.dt_values[di]);
            let invalid = |reason: String| {
                log::info!("grid cell ({gamma}, {dt}) invalid: {reason}");
                let mut spec = grid.base.clone();
                let (wg, wd) = (width(grid.gamma_values.len()), width(grid.dt_values.len()));
                spec.spec_id = format!("{}.g{gi:0wg$}d{di:0wd$}", grid.base.spec_id);
                spec.seed = mix_seed(grid.base.seed, (gi * grid.dt_values.len() + di) as u64);
                let mut row = SummaryRow::from_spec(&spec, RunStatus::Invalid);
                row.gamma = Some(gamma);
                row.dt = dt;
                GridCell {
                    gamma_index: gi,
                    dt_index: di,
                    gamma,
                    dt,
                    spec: None,
                    summary: row,
                    metric: None,
                    test_accuracy: None,
                }
            };
            let spec = match grid_cell_spec(grid, gi, di) {
                Ok(s) => s,
                Err(e) => return invalid(e.to_string()),
            };
            match run_single_with(&spec, exec) {
                Ok(out) => GridCell {
                    gamma_index: gi,
                    dt_index: di,
                    gamma,
                    dt,
                    metric: metric_of(grid.metric, &out),
                    test_accuracy: out.test_accuracy,
                    summary: out.summary,
                    spec: Some(spec),
                },
                Err(e) => invalid(e.to_string()),
            }
        })
        .collect()
}

/// One initial condition of a phase portrait.
#[derive(Debug, Clone)]
pub struct PortraitCell {
    pub index: (usize, usize),
    pub x0: Vec<f64>,
    pub metrics: PortraitMetrics,
    pub summary: SummaryRow,
    /// Positions every `record_stride` steps.
    pub path: Vec<(u64, Vec<f64>)>,
}

/// One run per lattice node, starting at rest with zero auxiliaries
/// (friction filled with `xi0`).
pub fn run_phase_portrait(p: &PortraitSpec, exec: Exec) -> Result<Vec<PortraitCell>, HarnessError> {
    p.check()?;
    let problem = Problem::build(&p.base.problem, p.base.noise_sigma)?;
    if problem.dim() != 2 {
        return Err(HarnessError::Config(format!(
            "portraits need a 2-D problem, got dimension {}",
            problem.dim()
        )));
    }
    let (n0, n1) = (p.shape[0], p.shape[1]);
    let (w0, w1) = (width(n0), width(n1));
    let cells: Vec<(usize, usize)> = (0..n0).flat_map(|i| (0..n1).map(move |j| (i, j))).collect();
    cells
        .into_par_iter()
        .map(|(i, j)| {
            let mut spec = p.base.clone();
            spec.spec_id = format!("{}.i{i:0w0$}j{j:0w1$}", p.base.spec_id);
            spec.x0 = X0Spec::GridCell {
                lower: p.lower.clone(),
                upper: p.upper.clone(),
                shape: p.shape.clone(),
                cell: vec![i, j],
            };
            let out = execute(&spec, exec, true)?;
            Ok(PortraitCell {
                index: (i, j),
                x0: lattice_point(&p.lower, &p.upper, &p.shape, &[i, j]),
                metrics: out.portrait.expect("portrait tracked"),
                summary: out.summary,
                path: out.path,
            })
        })
        .collect()
}

/// Mean and population standard deviation over the seeds that report a value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl Stat {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Option<Stat> {
        let v: Vec<f64> = values.into_iter().collect();
        if v.is_empty() {
            return None;
        }
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
        Some(Stat {
            mean,
            std: var.sqrt(),
            n: v.len(),
        })
    }
}

#[derive(Debug, Clone)]
pub struct EnsembleResult {
    pub runs: Vec<RunOutcome>,
    /// `(metric name, stat)` for final_loss, best_loss, kappa, r2, converged.
    pub stats: Vec<(&'static str, Option<Stat>)>,
    /// Recorded steps shared by every run.
    pub steps: Vec<u64>,
    pub times: Vec<f64>,
    pub mean_loss: Vec<f64>,
    pub std_loss: Vec<f64>,
    pub n_diverged: usize,
}

/// Runs seeds `base.seed, base.seed + 1, ...` in parallel.
pub fn run_seed_ensemble(e: &EnsembleSpec, exec: Exec) -> Result<EnsembleResult, HarnessError> {
    if e.n_seeds == 0 {
        return Err(HarnessError::Config("n_seeds must be >= 1".into()));
    }
    let w = width(e.n_seeds as usize).max(3);
    let runs: Vec<RunOutcome> = (0..e.n_seeds)
        .into_par_iter()
        .map(|i| {
            let mut spec = e.base.clone();
            spec.seed = e.base.seed.wrapping_add(i);
            spec.spec_id = format!("{}.s{i:0w$}", e.base.spec_id);
            run_single_with(&spec, exec)
        })
        .collect::<Result<_, _>>()?;

    let rows: Vec<&SummaryRow> = runs.iter().map(|r| &r.summary).collect();
    let stats = vec![
        (
            "final_loss",
            Stat::of(rows.iter().filter_map(|r| r.final_loss)),
        ),
        (
            "best_loss",
            Stat::of(rows.iter().filter_map(|r| r.best_loss)),
        ),
        ("kappa", Stat::of(rows.iter().filter_map(|r| r.kappa))),
        ("r2", Stat::of(rows.iter().filter_map(|r| r.r2))),
        (
            "converged",
            Stat::of(rows.iter().map(|r| f64::from(u8::from(r.converged)))),
        ),
    ];
    let len = runs.iter().map(|r| r.trajectory.len()).min().unwrap_or(0);
    let (mut mean_loss, mut std_loss) = (Vec::with_capacity(len), Vec::with_capacity(len));
    for k in 0..len {
        let s = Stat::of(runs.iter().map(|r| r.trajectory.losses[k])).expect("at least one run");
        mean_loss.push(s.mean);
        std_loss.push(s.std);
    }
    let first = &runs[0].trajectory;
    Ok(EnsembleResult {
        steps: first.steps[..len].to_vec(),
        times: first.times[..len].to_vec(),
        mean_loss,
        std_loss,
        n_diverged: rows.iter().filter(|r| r.diverged()).count(),
        stats,
        runs,
    })
}
