//! ADAM, the asymmetric update loop and its schedules.

mod adam;
mod schedule;
mod train;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use schedule::{FreqSchedule, LrSchedule, NoiseSchedule, ScheduleSpec};
pub use train::{
    train, update_parameters, EpochMetrics, GradCall, GradKind, RunRecord, Snapshot, StopReason,
    TrainConfig, DEFAULT_EARLY_STOP,
};
