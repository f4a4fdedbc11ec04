//! Library side of the `tfit` binary.

pub mod commands;
pub mod error;
pub mod samples;
pub mod simulate;

pub use commands::{cmd_fit, cmd_noise_estimate, FitReport, NoiseOutput};
pub use error::{CliError, CliResult};
pub use simulate::{run_simulation, Method, SigmaSpec, SimulationReport, SimulationSpec, TrialRecord};
