//! Deterministic execution substrate: virtual clock, single-writer topics,
//! a rate scheduler and seeded random streams.

mod clock;
mod rng;
mod scheduler;
mod topic;

pub use clock::{SimClock, Tick};
pub use rng::RngStreams;
pub use scheduler::{Execution, FaultEvent, RunMode, Scheduler, TaskFn, TaskSpec};
pub use topic::{Stamped, Topic, WriterToken};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum RuntimeError {
    #[error("topic `{topic}` already has writer `{existing}`, refusing `{requested}`")]
    SecondWriter { topic: String, existing: String, requested: String },
    #[error("token does not grant write access to `{topic}`")]
    NotWriter { topic: String },
    #[error("publish on `{topic}` at tick {now} precedes last stamp {last}")]
    StampRegression { topic: String, last: Tick, now: Tick },
    #[error("task `{task}` has zero period")]
    BadPeriod { task: String },
    #[error("task `{task}` registered twice")]
    DuplicateTask { task: String },
    #[error("cannot advance from tick {now} back to {until}")]
    TimeReversal { now: Tick, until: Tick },
}
