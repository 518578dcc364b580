//! Metrics, experiment sweeps and CSV reports.

mod metrics;
pub mod pipeline;
pub mod report;
pub mod sweep;

pub use metrics::*;
pub use pipeline::{clean_epochs, realize, run_arm, run_arm_with, Arm, ArmRun, Realization};
pub use report::{OutputFile, RunReport};
pub use sweep::{run_noise_sweep, run_outage_sweep};
