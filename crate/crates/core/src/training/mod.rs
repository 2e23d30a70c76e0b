//! SGD with momentum and coupled weight decay, epoch-level learning-rate
//! schedules, the multi-source training loop, and evaluation.

mod config;
mod evaluate;
mod metrics;
mod optim;
mod schedule;
mod trainer;

pub use config::TrainConfig;
pub use evaluate::{evaluate, MetricKind};
pub use metrics::{EpochRecord, RunMetrics};
pub use optim::{sgd_step, SgdState};
pub use schedule::{
    decayed_lr, plateau_schedule, step_schedule, LrScheduler, Monitor, PlateauState, SchedulerSpec,
    PLATEAU_THRESHOLD,
};
pub use trainer::{epoch_permutation, train};
