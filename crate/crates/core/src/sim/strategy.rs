//! Sync placement rules of the compared strategies.

use std::collections::BTreeSet;

use crate::sim::config::StrategySpec;

/// Absolute slack for comparing planning-boundary times.
const TIME_EPS: f64 = 1e-9;

/// Time-balance rule: the sync task is due once its balance
/// `now - last_sync - desired_period` reaches zero.
pub fn time_balance_decide(last_sync: f64, desired_period: f64, now: f64) -> bool {
    now - last_sync - desired_period >= -TIME_EPS
}

/// Whether `now` is a multiple of `period`.
pub fn on_regular_grid(now: f64, period: f64) -> bool {
    let k = (now / period).round();
    (now - k * period).abs() <= TIME_EPS
}

/// Engine-side strategy: the configurable kinds plus a replay of a fixed
/// set of sync instants.
#[derive(Clone, Debug, PartialEq)]
pub enum Strategy {
    Spec(StrategySpec),
    /// Sync exactly at the planning boundaries with these indices, with the
    /// Q-RAM allocation of the other strategies.
    Forced(BTreeSet<usize>),
}

impl Strategy {
    pub fn name(&self) -> String {
        match self {
            Strategy::Spec(s) => s.to_string(),
            Strategy::Forced(_) => "forced".to_string(),
        }
    }

    pub fn uses_qram(&self) -> bool {
        !matches!(self, Strategy::Spec(StrategySpec::TBreg { .. }))
    }
}

impl From<StrategySpec> for Strategy {
    fn from(s: StrategySpec) -> Self {
        Strategy::Spec(s)
    }
}
