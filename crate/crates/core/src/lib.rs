//! Adaptive task planning for a human and a robot sharing a
//! precedence-constrained kitting task.

pub mod allocation;
pub mod belief;
pub mod gantt;
pub mod log;
pub mod metrics;
pub mod planner;
pub mod replay;
pub mod scenario;
pub mod schedule;
pub mod sim;
pub mod task;
