//! Scenario configuration with full defaults.

use std::fmt;
use std::str::FromStr;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::radar::RadarParams;
use crate::tracker::TrackerParams;

pub const MIN_TARGET_SPEED: f64 = 800.0;
pub const MAX_TARGET_SPEED: f64 = 1300.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub duration: f64,
    pub planning_period: f64,
    pub sync_dwell: f64,
    pub tx_pos: [f64; 3],
    pub rx_pos: [f64; 3],
    pub strategy: StrategySpec,
    pub seeds: Vec<u64>,
    /// Samples per Monte Carlo covariance conversion.
    pub mc_samples: usize,
    pub error_sampling: ErrorSampling,
    pub clock: ClockConfig,
    pub search: SearchConfig,
    pub tracking: TrackTaskConfig,
    pub tracker: TrackerParams,
    pub radar: RadarParams,
    pub targets: Vec<TargetSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClockConfig {
    /// Bound `d` of the uniform drift step per second (s).
    pub step_bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub fence_az_half_deg: f64,
    pub fence_el_deg: f64,
    pub az_beams: usize,
    pub el_beams: usize,
    /// Time for one full pass over the fence with the whole budget (s).
    pub unloaded_full_update: f64,
    /// Utility of searching for the whole planning period.
    pub utility_weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackTaskConfig {
    pub max_dwells: u32,
    pub pulse_options: Vec<u32>,
    pub priority: f64,
    /// Error at which a track's utility reaches zero (m).
    pub sigma_max: f64,
    /// RCS assumed when predicting track-dwell SNR (m²).
    pub planning_rcs: f64,
    /// Tracks whose position std exceeds this are dropped (m).
    pub max_position_std: f64,
    /// Dwell length of the rule-based baseline.
    pub rule_pulses: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    pub spawn_time: f64,
    pub position: [f64; 3],
    pub velocity: [f64; 3],
    #[serde(default = "unit_rcs")]
    pub rcs: f64,
}

fn unit_rcs() -> f64 {
    1.0
}

impl TargetSpec {
    pub fn is_alive(&self, t: f64) -> bool {
        t >= self.spawn_time
    }

    pub fn position_at(&self, t: f64) -> Vector3<f64> {
        Vector3::from(self.position) + Vector3::from(self.velocity) * (t - self.spawn_time)
    }

    pub fn speed(&self) -> f64 {
        Vector3::from(self.velocity).norm()
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorSampling {
    /// One sample per accepted update of a confirmed track.
    PerUpdate,
    /// One sample per confirmed track at the end of every planning period.
    PerPeriod,
}

/// Allocation strategy. The text form is `caseDecision`, `regUpdate<N>` or
/// `TBreg<N>`, with `N` the sync period in seconds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum StrategySpec {
    CaseDecision,
    RegUpdate { period: f64 },
    TBreg { desired_period: f64 },
}

impl fmt::Display for StrategySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StrategySpec::CaseDecision => write!(f, "caseDecision"),
            StrategySpec::RegUpdate { period } => write!(f, "regUpdate{period}"),
            StrategySpec::TBreg { desired_period } => write!(f, "TBreg{desired_period}"),
        }
    }
}

impl FromStr for StrategySpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let period = |rest: &str| -> Result<f64> {
            match rest.parse::<f64>() {
                Ok(p) if p.is_finite() && p > 0.0 => Ok(p),
                _ => Err(Error::InvalidConfig(format!("unknown strategy {s:?}"))),
            }
        };
        if s == "caseDecision" {
            Ok(StrategySpec::CaseDecision)
        } else if let Some(rest) = s.strip_prefix("regUpdate") {
            Ok(StrategySpec::RegUpdate { period: period(rest)? })
        } else if let Some(rest) = s.strip_prefix("TBreg") {
            Ok(StrategySpec::TBreg {
                desired_period: period(rest)?,
            })
        } else {
            Err(Error::InvalidConfig(format!("unknown strategy {s:?}")))
        }
    }
}

impl TryFrom<String> for StrategySpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<StrategySpec> for String {
    fn from(s: StrategySpec) -> String {
        s.to_string()
    }
}

/// caseDecision, regUpdate2/3/4/10 and TBreg3.
pub fn standard_strategies() -> Vec<StrategySpec> {
    vec![
        StrategySpec::CaseDecision,
        StrategySpec::RegUpdate { period: 2.0 },
        StrategySpec::RegUpdate { period: 3.0 },
        StrategySpec::RegUpdate { period: 4.0 },
        StrategySpec::RegUpdate { period: 10.0 },
        StrategySpec::TBreg { desired_period: 3.0 },
    ]
}

impl Default for ClockConfig {
    fn default() -> Self {
        Self { step_bound: 1.0e-6 }
    }
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            fence_az_half_deg: 40.0,
            fence_el_deg: 5.0,
            az_beams: 40,
            el_beams: 3,
            unloaded_full_update: 10.0,
            utility_weight: 0.005,
        }
    }
}

impl Default for TrackTaskConfig {
    fn default() -> Self {
        Self {
            max_dwells: 2,
            pulse_options: vec![16, 32, 64],
            priority: 1.0,
            sigma_max: 30_000.0,
            planning_rcs: 1.0,
            max_position_std: 20_000.0,
            rule_pulses: 32,
        }
    }
}

/// Six inbound targets spawned every 10 s, roughly 165 km out.
pub fn default_targets() -> Vec<TargetSpec> {
    // (azimuth deg, altitude m, speed m/s, heading offset deg)
    let specs = [
        (-25.0, 8_000.0, 1000.0, 5.0),
        (15.0, 6_000.0, 1200.0, -8.0),
        (-5.0, 10_000.0, 850.0, 3.0),
        (30.0, 7_000.0, 1100.0, -5.0),
        (-15.0, 11_000.0, 950.0, 8.0),
        (5.0, 9_000.0, 1250.0, -3.0),
    ];
    specs
        .iter()
        .enumerate()
        .map(|(i, &(az_deg, alt, speed, offset_deg))| {
            let az: f64 = f64::to_radians(az_deg);
            let range = 165_000.0;
            let heading = az + std::f64::consts::PI + f64::to_radians(offset_deg);
            TargetSpec {
                spawn_time: 10.0 * i as f64,
                position: [range * az.sin(), range * az.cos(), alt],
                velocity: [speed * heading.sin(), speed * heading.cos(), 0.0],
                rcs: 1.0,
            }
        })
        .collect()
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            duration: 60.0,
            planning_period: 1.0,
            sync_dwell: 0.231,
            tx_pos: [-10_000.0, 0.0, 0.0],
            rx_pos: [10_000.0, 0.0, 0.0],
            strategy: StrategySpec::CaseDecision,
            seeds: (1..=20).collect(),
            mc_samples: 500,
            error_sampling: ErrorSampling::PerUpdate,
            clock: ClockConfig::default(),
            search: SearchConfig::default(),
            tracking: TrackTaskConfig::default(),
            tracker: TrackerParams::default(),
            radar: RadarParams::default(),
            targets: default_targets(),
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("{name} must be > 0, got {v}")))
    }
}

impl ScenarioConfig {
    pub fn tx(&self) -> Vector3<f64> {
        Vector3::from(self.tx_pos)
    }

    pub fn rx(&self) -> Vector3<f64> {
        Vector3::from(self.rx_pos)
    }

    /// Number of planning boundaries, counting the closing one at `duration`.
    pub fn boundaries(&self) -> usize {
        (self.duration / self.planning_period + 1e-9).floor() as usize + 1
    }

    pub fn search_dwell(&self) -> f64 {
        self.radar.dwell_duration(self.radar.search_pulses)
    }

    pub fn search_beam_count(&self) -> usize {
        self.search.az_beams * self.search.el_beams
    }

    pub fn validate(&self) -> Result<()> {
        positive("duration", self.duration)?;
        positive("planning_period", self.planning_period)?;
        positive("sync_dwell", self.sync_dwell)?;
        if self.sync_dwell >= self.planning_period {
            return Err(Error::InfeasibleConfig(format!(
                "sync_dwell {} s does not fit into planning_period {} s",
                self.sync_dwell, self.planning_period
            )));
        }
        if self.mc_samples < 100 {
            return Err(Error::InvalidConfig(format!("mc_samples must be >= 100, got {}", self.mc_samples)));
        }
        if !(self.clock.step_bound.is_finite() && self.clock.step_bound >= 0.0) {
            return Err(Error::InvalidConfig("clock.step_bound must be >= 0".into()));
        }
        if self.tx_pos.iter().chain(&self.rx_pos).any(|x| !x.is_finite()) {
            return Err(Error::InvalidConfig("sensor positions must be finite".into()));
        }
        match &self.strategy {
            StrategySpec::CaseDecision => {}
            StrategySpec::RegUpdate { period } => positive("strategy period", *period)?,
            StrategySpec::TBreg { desired_period } => positive("strategy period", *desired_period)?,
        }
        self.radar.validate()?;
        positive("search.fence_az_half_deg", self.search.fence_az_half_deg)?;
        positive("search.fence_el_deg", self.search.fence_el_deg)?;
        positive("search.unloaded_full_update", self.search.unloaded_full_update)?;
        if self.search.az_beams == 0 || self.search.el_beams == 0 {
            return Err(Error::InvalidConfig("search needs at least one beam per axis".into()));
        }
        if !(self.search.utility_weight >= 0.0) {
            return Err(Error::InvalidConfig("search.utility_weight must be >= 0".into()));
        }
        let full = self.search_beam_count() as f64 * self.search_dwell();
        if (full - self.search.unloaded_full_update).abs() > 1e-6 * self.search.unloaded_full_update {
            return Err(Error::InvalidConfig(format!(
                "search.unloaded_full_update is {} s but {} beams of {} pulses take {full} s",
                self.search.unloaded_full_update,
                self.search_beam_count(),
                self.radar.search_pulses
            )));
        }
        if self.search_dwell() > self.planning_period {
            return Err(Error::InfeasibleConfig("a search dwell does not fit into the planning period".into()));
        }
        let t = &self.tracking;
        if t.pulse_options.is_empty() || t.pulse_options.contains(&0) || t.rule_pulses == 0 {
            return Err(Error::InvalidConfig("tracking pulse counts must be > 0".into()));
        }
        positive("tracking.priority", t.priority)?;
        positive("tracking.sigma_max", t.sigma_max)?;
        positive("tracking.planning_rcs", t.planning_rcs)?;
        positive("tracking.max_position_std", t.max_position_std)?;
        let tr = &self.tracker;
        if !(tr.process_noise >= 0.0) || !(tr.gate_chi2 > 0.0) || !(tr.init_velocity_std > 0.0) {
            return Err(Error::InvalidConfig("tracker parameters out of range".into()));
        }
        if tr.confirm_hits == 0 || tr.confirm_hits > tr.confirm_window || tr.drop_after_misses == 0 {
            return Err(Error::InvalidConfig("tracker lifecycle counts out of range".into()));
        }
        for (i, target) in self.targets.iter().enumerate() {
            let s = target.speed();
            if !(MIN_TARGET_SPEED..=MAX_TARGET_SPEED).contains(&s) {
                return Err(Error::InvalidConfig(format!(
                    "targets[{i}] speed {s:.1} m/s outside [{MIN_TARGET_SPEED}, {MAX_TARGET_SPEED}]"
                )));
            }
            positive(&format!("targets[{i}].rcs"), target.rcs)?;
            if !(target.spawn_time >= 0.0) {
                return Err(Error::InvalidConfig(format!("targets[{i}].spawn_time must be >= 0")));
            }
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidConfig(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        ScenarioConfig::default().validate().unwrap();
        assert_eq!(ScenarioConfig::default().boundaries(), 61);
    }

    #[test]
    fn strategy_names_round_trip() {
        for s in standard_strategies() {
            assert_eq!(s.to_string().parse::<StrategySpec>().unwrap(), s);
        }
        assert_eq!("regUpdate3".parse::<StrategySpec>().unwrap(), StrategySpec::RegUpdate { period: 3.0 });
        assert!("regUpdate0".parse::<StrategySpec>().is_err());
        assert!("greedy".parse::<StrategySpec>().is_err());
        assert!("TBreg".parse::<StrategySpec>().is_err());
    }

    #[test]
    fn infeasible_sync_dwell() {
        let cfg = ScenarioConfig {
            sync_dwell: 1.0,
            ..Default::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::InfeasibleConfig(_))));
    }

    #[test]
    fn target_speed_bounds() {
        let mut cfg = ScenarioConfig::default();
        cfg.targets[0].velocity = [0.0, -700.0, 0.0];
        assert!(matches!(cfg.validate(), Err(Error::InvalidConfig(_))));
        for t in default_targets() {
            assert!((MIN_TARGET_SPEED..=MAX_TARGET_SPEED).contains(&t.speed()));
        }
    }

    #[test]
    fn toml_round_trip_is_idempotent() {
        let cfg = ScenarioConfig::default();
        let text = cfg.to_toml().unwrap();
        let back = ScenarioConfig::from_toml(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_toml().unwrap(), text);
    }

    #[test]
    fn partial_toml_takes_defaults() {
        let cfg = ScenarioConfig::from_toml("duration = 10.0\nstrategy = \"regUpdate3\"\n[clock]\nstep_bound = 0.0\n").unwrap();
        assert_eq!(cfg.duration, 10.0);
        assert_eq!(cfg.strategy, StrategySpec::RegUpdate { period: 3.0 });
        assert_eq!(cfg.clock.step_bound, 0.0);
        assert_eq!(cfg.targets.len(), 6);
        assert!(ScenarioConfig::from_toml("durration = 1").is_err());
    }
}
