//! Experiment harness: synthetic data, fitting by VCA, SISA or LISA, and
//! seeded sweeps that write CSV and gnuplot tables.

pub mod commands;
pub mod config;
pub mod experiment;
pub mod output;

pub use commands::{cells, eval, fit, generate, run_cell, sweep, Cell, FitReport, Manifest, SweepReport};
pub use config::{ExperimentConfig, Method, Overrides};
pub use experiment::{fit_method, make_problem, CellSeeds, Fit, Problem};
