//! Momentum optimizers with kinetic-energy regulation.
//!
//! The split optimizers (`ikfad`, `cd`, `cadam`, `ldhd`) advance one step by
//! composing exactly solvable sub-flows from [`flows`]. Euler and baseline
//! rules (`cd_euler`, `msgd`, `adam`) are provided for comparison.

// `!(a >= 0.0)` style checks also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod flows;
pub mod optimizers;
pub mod oracle;
pub mod problems;
pub mod state;
pub mod trajectory;

pub use error::{Error, Result};
pub use optimizers::{step, MomentumSchedule, OptimizerConfig, Stepper};
pub use oracle::{eval_stochastic_grad, GradientOracle, Noisy};
pub use state::{init_state, rest_state, HyperParams, OptState, OptimizerKind};
pub use trajectory::{integrate, integrate_with, RecordOptions, Trajectory};
