//! Multi-seed experiments and the per-strategy summary table.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::config::{ScenarioConfig, StrategySpec};
use crate::sim::engine::{run_strategy, RunReport};
use crate::sim::strategy::Strategy;
use crate::stats::Summary;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub strategy: String,
    pub runs: usize,
    /// Statistics of the pooled error samples of all runs.
    pub summary: Option<Summary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloResult {
    /// Strategy-major, seeds ascending within a strategy.
    pub reports: Vec<RunReport>,
    pub table: Vec<TableRow>,
}

/// Every strategy on every seed. Runs may execute in parallel; the output
/// order does not depend on scheduling.
pub fn monte_carlo(config: &ScenarioConfig, strategies: &[StrategySpec], seeds: &[u64]) -> Result<MonteCarloResult> {
    if seeds.is_empty() || strategies.is_empty() {
        return Err(Error::InvalidArgument("need at least one seed and one strategy".into()));
    }
    config.validate()?;
    let mut seeds = seeds.to_vec();
    seeds.sort_unstable();
    seeds.dedup();
    let jobs: Vec<(Strategy, u64)> = strategies
        .iter()
        .flat_map(|s| seeds.iter().map(move |&seed| (Strategy::from(s.clone()), seed)))
        .collect();
    let reports = jobs
        .par_iter()
        .map(|(s, seed)| run_strategy(config, s, *seed))
        .collect::<Result<Vec<_>>>()?;
    let table = aggregate(&reports)?;
    Ok(MonteCarloResult { reports, table })
}

/// One row per strategy in order of first appearance, pooling the samples
/// of all its runs.
pub fn aggregate(reports: &[RunReport]) -> Result<Vec<TableRow>> {
    let mut order: Vec<String> = Vec::new();
    for r in reports {
        if !order.contains(&r.strategy) {
            order.push(r.strategy.clone());
        }
    }
    order
        .into_iter()
        .map(|name| {
            let runs: Vec<&RunReport> = reports.iter().filter(|r| r.strategy == name).collect();
            let pooled: Vec<f64> = runs.iter().flat_map(|r| r.errors()).collect();
            let summary = if pooled.is_empty() {
                None
            } else {
                Some(Summary::of(&pooled)?)
            };
            Ok(TableRow {
                strategy: name,
                runs: runs.len(),
                summary,
            })
        })
        .collect()
}
