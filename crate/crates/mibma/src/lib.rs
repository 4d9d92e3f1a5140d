//! Command line, CSV formats and the parallel Monte Carlo harness built on
//! [`mibma_core`].

pub mod cli;
pub mod config;
pub mod error;
pub mod harness;
pub mod io;

pub use error::CliError;
pub use harness::{run_monte_carlo, MonteCarloRun};
