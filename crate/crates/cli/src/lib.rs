//! Command-line front end for the `ep-dimer` solvers: detuning sweeps, EP
//! location, a self-test suite and plot-ready data files.

pub mod config;
pub mod ep;
pub mod error;
pub mod output;
pub mod plotdata;
pub mod sweep;
pub mod verify;

pub use config::{Format, ParamArgs, SweepArgs, SweepConfig};
pub use error::{CliError, Result};
pub use output::{Row, RunManifest, CSV_HEADER};
