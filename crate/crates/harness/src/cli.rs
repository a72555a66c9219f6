//! `kinopt` command line.
//!
//! Exit codes: 0 success, 1 spec or I/O error, 2 divergence in `run`.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use kinopt::analysis::{power_spectrum, SpectrumReport};

use crate::output::{
    read_trajectory_samples, write_ensemble_stats, write_grid, write_mean_curve, write_paths,
    write_portrait, write_summary, write_trajectory,
};
use crate::problem::{normalized, Problem};
use crate::run::{
    run_gamma_dt_grid, run_phase_portrait, run_seed_ensemble, run_single_with, Exec, RunStatus,
    SummaryRow,
};
use crate::spec::{EnsembleSpec, GridSpec, Output, PortraitSpec, RunSpec};
use crate::HarnessError;

pub const EXIT_DIVERGED: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "kinopt",
    version,
    about = "Run kinetic-energy regulated optimizers and record CSV artifacts"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Execute a single run spec.
    Run(Common),
    /// Sweep a (gamma, dt) grid around a base run.
    Grid(Common),
    /// Run a lattice of initial conditions on a 2-D problem.
    Portrait(Common),
    /// Repeat a run over consecutive seeds.
    Ensemble(Common),
    /// Power spectrum of positions stored in a trajectory CSV.
    Spectrum(SpectrumArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides `run.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub threads: Option<usize>,
    /// Record wall-clock time in summaries.
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    /// Trajectory CSV with `x_*` columns.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Run spec supplying the problem and `spectrum.direction`.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Comma-separated direction, normalized before use.
    #[arg(long, conflicts_with_all = ["axis", "spec"])]
    pub direction: Option<String>,
    /// Project onto a single coordinate.
    #[arg(long, conflicts_with = "spec")]
    pub axis: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub threads: Option<usize>,
}

fn read(path: &Path) -> Result<String, HarnessError> {
    fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, HarnessError> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn threads(n: Option<usize>) {
    if let Some(n) = n {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            log::warn!("thread pool already configured: {e}");
        }
    }
}

/// Runs the parsed command and returns the process exit code.
pub fn execute(cli: &Cli) -> Result<i32, HarnessError> {
    match &cli.command {
        Command::Run(c) => cmd_run(c),
        Command::Grid(c) => cmd_grid(c),
        Command::Portrait(c) => cmd_portrait(c),
        Command::Ensemble(c) => cmd_ensemble(c),
        Command::Spectrum(s) => cmd_spectrum(s),
    }
}

fn prepare(c: &Common) -> Result<Exec, HarnessError> {
    threads(c.threads);
    fs::create_dir_all(&c.out)?;
    Ok(Exec { timing: c.timing })
}

fn cmd_run(c: &Common) -> Result<i32, HarnessError> {
    let mut spec = RunSpec::parse(&read(&c.spec)?)?;
    if let Some(s) = c.seed {
        spec.seed = s;
    }
    let exec = prepare(c)?;
    fs::write(c.out.join("run.spec"), spec.to_spec_string())?;
    let out = run_single_with(&spec, exec)?;
    for o in &spec.outputs {
        match o {
            Output::SummaryCsv => write_summary(
                create(&c.out, "summary.csv")?,
                std::slice::from_ref(&out.summary),
            )?,
            Output::TrajectoryCsv => {
                write_trajectory(create(&c.out, "trajectory.csv")?, &out.trajectory)?
            }
            Output::SpectrumCsv => {
                let s = out.spectrum.as_ref().expect("spectrum requested");
                s.write_csv(create(&c.out, "spectrum.csv")?)?;
                println!("{s}");
            }
            Output::PortraitCsv => {
                let m = out.portrait.expect("portrait requested");
                let mut w = csv::Writer::from_writer(create(&c.out, "portrait.csv")?);
                w.write_record([
                    "spec_id",
                    "converged",
                    "overshoot_count",
                    "path_ratio",
                    "final_distance",
                ])?;
                w.write_record([
                    spec.spec_id.clone(),
                    m.converged.to_string(),
                    m.overshoot_count.to_string(),
                    format!("{:?}", m.path_ratio),
                    format!("{:?}", m.final_distance),
                ])?;
                w.flush()?;
            }
        }
    }
    report(&out.summary);
    Ok(match out.summary.status {
        RunStatus::Diverged(_) => EXIT_DIVERGED,
        _ => 0,
    })
}

fn report(r: &SummaryRow) {
    let status = match r.status {
        RunStatus::Completed => "completed".to_string(),
        RunStatus::Diverged(k) => format!("diverged at step {k}"),
        RunStatus::Invalid => "invalid".to_string(),
    };
    println!(
        "{} {}: {status}, final_loss={} converged={}",
        r.spec_id,
        r.optimizer,
        r.final_loss
            .map_or_else(String::new, |v| format!("{v:.6e}")),
        r.converged
    );
}

fn cmd_grid(c: &Common) -> Result<i32, HarnessError> {
    let mut grid = GridSpec::parse(&read(&c.spec)?)?;
    if let Some(s) = c.seed {
        grid.base.seed = s;
    }
    let exec = prepare(c)?;
    let cells = run_gamma_dt_grid(&grid, exec);
    let cell_dir = c.out.join("cells");
    fs::create_dir_all(&cell_dir)?;
    for cell in &cells {
        if let Some(s) = &cell.spec {
            fs::write(
                cell_dir.join(format!("{}.spec", s.spec_id)),
                s.to_spec_string(),
            )?;
        }
    }
    let rows: Vec<SummaryRow> = cells.iter().map(|c| c.summary.clone()).collect();
    write_summary(create(&c.out, "summary.csv")?, &rows)?;
    write_grid(create(&c.out, "grid.csv")?, &cells)?;
    let count = |f: fn(&RunStatus) -> bool| cells.iter().filter(|c| f(&c.summary.status)).count();
    println!(
        "{} cells: {} completed, {} diverged, {} invalid",
        cells.len(),
        count(|s| *s == RunStatus::Completed),
        count(|s| matches!(s, RunStatus::Diverged(_))),
        count(|s| *s == RunStatus::Invalid)
    );
    Ok(0)
}

fn cmd_portrait(c: &Common) -> Result<i32, HarnessError> {
    let mut p = PortraitSpec::parse(&read(&c.spec)?)?;
    if let Some(s) = c.seed {
        p.base.seed = s;
    }
    let exec = prepare(c)?;
    let cells = run_phase_portrait(&p, exec)?;
    let rows: Vec<SummaryRow> = cells.iter().map(|c| c.summary.clone()).collect();
    write_summary(create(&c.out, "summary.csv")?, &rows)?;
    write_portrait(create(&c.out, "portrait.csv")?, &cells)?;
    write_paths(create(&c.out, "paths.csv")?, &cells)?;
    let n = cells.len() as f64;
    let converged = cells.iter().filter(|c| c.metrics.converged).count();
    let overshoot = cells
        .iter()
        .map(|c| c.metrics.overshoot_count as f64)
        .sum::<f64>()
        / n;
    println!(
        "{} cells: {converged} converged, mean overshoot_count {overshoot:.2}",
        cells.len()
    );
    Ok(0)
}

fn cmd_ensemble(c: &Common) -> Result<i32, HarnessError> {
    let mut e = EnsembleSpec::parse(&read(&c.spec)?)?;
    if let Some(s) = c.seed {
        e.base.seed = s;
    }
    let exec = prepare(c)?;
    let res = run_seed_ensemble(&e, exec)?;
    let rows: Vec<SummaryRow> = res.runs.iter().map(|r| r.summary.clone()).collect();
    write_summary(create(&c.out, "summary.csv")?, &rows)?;
    write_ensemble_stats(create(&c.out, "ensemble.csv")?, &res)?;
    write_mean_curve(create(&c.out, "mean_curve.csv")?, &res)?;
    for (name, s) in &res.stats {
        if let Some(s) = s {
            println!("{name}: mean={:.6e} std={:.3e} n={}", s.mean, s.std, s.n);
        }
    }
    Ok(0)
}

fn cmd_spectrum(a: &SpectrumArgs) -> Result<i32, HarnessError> {
    threads(a.threads);
    let (steps, xs) = read_trajectory_samples(File::open(&a.input)?)?;
    let dim = xs.first().map_or(0, Vec::len);
    let dir: Vec<f64> = if let Some(d) = &a.direction {
        let v: Vec<f64> = d
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| HarnessError::Config(format!("bad --direction: {e}")))?;
        normalized(&v)?
    } else if let Some(i) = a.axis {
        if i >= dim {
            return Err(HarnessError::Config(format!(
                "axis {i} out of range for dimension {dim}"
            )));
        }
        let mut v = vec![0.0; dim];
        v[i] = 1.0;
        v
    } else if let Some(path) = &a.spec {
        let spec = RunSpec::parse(&read(path)?)?;
        let problem = Problem::build(&spec.problem, 0.0)?;
        problem.direction(&spec.spectrum_direction)?
    } else {
        return Err(HarnessError::Config(
            "give one of --direction, --axis or --spec".into(),
        ));
    };
    if dir.len() != dim {
        return Err(kinopt::Error::DimensionMismatch {
            expected: dim,
            found: dir.len(),
        }
        .into());
    }
    let stride = match steps.as_slice() {
        [a, b, ..] if b > a => b - a,
        _ => 1,
    };
    if steps.windows(2).any(|w| w[1] - w[0] != stride) {
        return Err(HarnessError::Config(
            "state samples are not evenly spaced".into(),
        ));
    }
    let signal: Vec<f64> = xs
        .iter()
        .map(|x| x.iter().zip(&dir).map(|(a, b)| a * b).sum())
        .collect();
    let report: SpectrumReport = power_spectrum(&signal, stride)?;
    fs::create_dir_all(&a.out)?;
    report.write_csv(create(&a.out, "spectrum.csv")?)?;
    println!("{report}");
    Ok(0)
}
