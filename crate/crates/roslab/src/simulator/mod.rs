//! Discrete-event simulation of the multiclass ROS queue with reneging.

pub mod config;
pub mod engine;
pub mod functional;
pub mod log;
pub mod queue;
pub mod replay;

pub use config::{InitialQueue, InitialServer, ServiceSpecs, SystemConfig};
pub use engine::{select_job, simulate, BusyServer, Simulation};
pub use functional::{busy_intervals, entry_completion_gap, path_functional, time_change, BusyInterval, PathSeries};
pub use log::{EventKind, EventLog, EventRecord, EventSink, NullSink, Selection};
pub use queue::{QueueEntry, QueueMeasure};
pub use replay::Replay;
