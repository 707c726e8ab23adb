//! Sweeps over the kicked Ising benchmark, results tables, convergence
//! diagnostics and method comparison behind the `sim` binary.

pub mod config;
pub mod error;
pub mod report;
pub mod sweep;

pub use config::{default_theta_grid, LatticeSource, MethodSpec, Param, RunConfig};
pub use error::{Error, Result};
pub use report::{compare, convergence_report, Comparison, Diagnostics};
pub use sweep::{sweep, ResultRow, SweepSummary, Table, TableHeader};
