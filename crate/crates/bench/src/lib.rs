//! Convergence and timing harness for the `svi` integrators.
//!
//! An experiment sweeps the step size of one or more integrators on a preset system,
//! measures the `L²` error of each trajectory against an analytic or self-refined
//! benchmark, times repeated integrations, and writes one CSV (`h,e_l2,time_mean_s,
//! time_std_s`) plus a JSON sidecar per integrator.

pub mod config;
pub mod error;
pub mod integrators;
pub mod metrics;
pub mod runner;

pub use config::{BenchmarkMode, ExperimentConfig, Overrides, Sweep};
pub use error::{BenchError, Result};
pub use integrators::{simulate, IntegratorId, Run};
pub use metrics::{error_2norm, error_l2, fit_convergence_slope, fit_convergence_slope_above, Trajectory};
pub use runner::{run_experiment, write_results, ConvergenceRecord, IntegratorResult};

/// The guide's benchmark chapter, compiled so that its listings run as doctests.
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/benchmarks.md")]
mod book {}
