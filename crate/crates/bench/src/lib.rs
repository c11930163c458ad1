//! Command-line front end of the cavity solver: single solves, serial versus
//! decomposed verification, scaling sweeps with CSV and SVG output.

pub mod commands;
pub mod config;
pub mod dump;
pub mod svg;

pub use commands::{cmd_bench, cmd_solve, cmd_verify, BenchPlan, CsvRow, VerifyReport};
pub use config::{GridSize, RunConfig};
