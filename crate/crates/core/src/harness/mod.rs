//! Configuration, the training loop, schedules, sweeps and CSV output.

mod config;
mod run;
pub mod schedule;
mod sweep;
pub mod telemetry;

pub use config::{Budget, ConfigMap, ExperimentConfig, ObjectiveConfig, ObjectiveKind, KNOWN_KEYS};
pub use run::{run, sibling, write_outputs, RunResult, RunSummary};
pub use schedule::{schedule_lr, schedule_p, LrSchedule, PSchedule};
pub use sweep::{sweep, SweepResult, SweepRun};
