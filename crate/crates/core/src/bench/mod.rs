//! Benchmark problems, run configuration, the simulation driver and the
//! experiment studies behind the command line tool.

pub mod config;
pub mod problems;
pub mod run;
pub mod studies;

pub use config::{CouplingKind, IntegratorKind, PressureKind, RunConfig, StepPolicy};
pub use problems::{ProblemKind, ProblemSpec};
pub use run::{run_simulation, RunReport};
