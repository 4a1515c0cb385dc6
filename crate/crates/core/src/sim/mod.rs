//! Bistatic tracking simulation around the resource manager.

pub mod config;
pub mod engine;
pub mod monte_carlo;
pub mod strategy;
pub mod tasks;

pub use config::{standard_strategies, ErrorSampling, ScenarioConfig, StrategySpec, TargetSpec};
pub use engine::{run, run_strategy, LoadMetrics, RunReport};
pub use monte_carlo::{aggregate, monte_carlo, MonteCarloResult, TableRow};
pub use strategy::{time_balance_decide, Strategy};
pub use tasks::{build_task_set, SearchState};
