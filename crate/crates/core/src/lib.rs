//! Q-RAM radar resource management with adaptive selection of the
//! synchronisation scheme for a bistatic (passive) receiver, embedded in a
//! closed-loop tracking simulation.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod clock;
pub mod error;
pub mod output;
pub mod qram;
pub mod radar;
pub mod sim;
pub mod stats;
pub mod sync_planner;
pub mod tracker;

pub use error::{Error, Result};
pub use qram::{build_job_list, compound, greedy_allocate, Allocation, JobList, ResourceVector, TaskConfig, TaskId};
pub use sim::{monte_carlo, run, ScenarioConfig, StrategySpec};
pub use sync_planner::{predict_sync_error, select_scheme, SyncScheme};
