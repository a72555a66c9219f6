//! Experiment orchestration for the `kinopt` optimizers: spec files, single
//! runs, `(gamma, dt)` grids, phase portraits, seed ensembles and CSV output.

// `!(a >= 0.0)` style checks also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod output;
pub mod problem;
pub mod run;
pub mod spec;

pub use run::{
    grid_cell_spec, run_gamma_dt_grid, run_phase_portrait, run_seed_ensemble, run_single,
    run_single_with, EnsembleResult, Exec, GridCell, PortraitCell, RunOutcome, RunStatus, Stat,
    SummaryRow,
};
pub use spec::{
    Direction, EnsembleSpec, GridMetric, GridSpec, Output, PortraitSpec, ProblemSpec, RunSpec,
    SpecError, X0Spec,
};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("spec: {0}")]
    Spec(#[from] SpecError),
    #[error(transparent)]
    Core(#[from] kinopt::Error),
    #[error("{0}")]
    Config(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}
