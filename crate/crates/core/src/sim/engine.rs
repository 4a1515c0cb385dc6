//! Closed-loop simulation of one run.
//!
//! Time advances in planning periods. At every boundary the strategy fixes
//! the sync dwells and the allocation of the period; the dwells then execute
//! back to back: syncs, first-round track dwells by urgency, half of the
//! search beams, second-round track dwells, the remaining search beams.
//! The final boundary at `duration` only takes the sync decision.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::Vector3;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::clock::ClockState;
use crate::error::{Error, Result};
use crate::qram::ResourceVector;
use crate::radar::{az_el, detect, mc_covariance, receiver_range, snr, MonostaticMeasurement, NoiseStds, Pointing, ReceivePath};
use crate::sim::config::{ErrorSampling, ScenarioConfig, StrategySpec};
use crate::sim::strategy::{on_regular_grid, time_balance_decide, Strategy};
use crate::sim::tasks::{build_task_set, plan_from_allocation, rule_allocation, urgency_order, PeriodPlan, SearchState};
use crate::stats::Summary;
use crate::sync_planner::{select_scheme, ClockView, SyncErrorProfile, SyncScheme};
use crate::tracker::{record_errors, Track, TrackErrorSample, TrackStatus, UpdateOutcome};

/// Slack of the per-period budget check (s).
pub const BUDGET_EPS: f64 = 1e-9;

const STREAM_CLOCK: u64 = 1;
const STREAM_NOISE: u64 = 2;
const STREAM_MC: u64 = 3;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LoadMetrics {
    pub periods: usize,
    pub sync_time: f64,
    pub track_time: f64,
    pub search_time: f64,
    /// Largest executed dwell time in any period (s).
    pub max_period_load: f64,
    pub budget_violations: usize,
    pub track_dwells: usize,
    pub search_dwells: usize,
    pub detections: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub strategy: String,
    pub seed: u64,
    pub error_sampling: ErrorSampling,
    pub error_samples: Vec<TrackErrorSample>,
    pub sync_times: Vec<f64>,
    /// Absent when no confirmed track produced a sample.
    pub stats: Option<Summary>,
    pub tracks_confirmed: usize,
    pub targets_acquired: usize,
    pub load: LoadMetrics,
}

impl RunReport {
    pub fn errors(&self) -> Vec<f64> {
        self.error_samples.iter().map(|s| s.position_error).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum DwellKind {
    Sync,
    Track { track_id: u64, pulses: u32 },
    Search,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

struct Engine<'a> {
    cfg: &'a ScenarioConfig,
    strategy: Strategy,
    tx: Vector3<f64>,
    rx: Vector3<f64>,
    clock: ClockState,
    noise_rng: ChaCha8Rng,
    mc_rng: ChaCha8Rng,
    tracks: Vec<Track>,
    next_track_id: u64,
    search: SearchState,
    samples: Vec<TrackErrorSample>,
    sync_times: Vec<f64>,
    confirmed: BTreeSet<u64>,
    acquired_targets: BTreeSet<u64>,
    load: LoadMetrics,
}

/// Simulate `config.strategy` with `seed`.
pub fn run(config: &ScenarioConfig, seed: u64) -> Result<RunReport> {
    run_strategy(config, &Strategy::from(config.strategy.clone()), seed)
}

/// Simulate an explicit strategy with `seed`.
pub fn run_strategy(config: &ScenarioConfig, strategy: &Strategy, seed: u64) -> Result<RunReport> {
    config.validate()?;
    let clock_seed = stream(seed, STREAM_CLOCK).next_u64();
    let mut engine = Engine {
        cfg: config,
        strategy: strategy.clone(),
        tx: config.tx(),
        rx: config.rx(),
        clock: ClockState::new(config.clock.step_bound, clock_seed, 0.0)?,
        noise_rng: stream(seed, STREAM_NOISE),
        mc_rng: stream(seed, STREAM_MC),
        tracks: Vec::new(),
        next_track_id: 1,
        search: SearchState::new(config),
        samples: Vec::new(),
        sync_times: Vec::new(),
        confirmed: BTreeSet::new(),
        acquired_targets: BTreeSet::new(),
        load: LoadMetrics::default(),
    };
    engine.run_all()?;
    let stats = if engine.samples.is_empty() {
        None
    } else {
        Some(Summary::of(&engine.samples.iter().map(|s| s.position_error).collect::<Vec<_>>())?)
    };
    Ok(RunReport {
        strategy: strategy.name(),
        seed,
        error_sampling: config.error_sampling,
        error_samples: engine.samples,
        sync_times: engine.sync_times,
        stats,
        tracks_confirmed: engine.confirmed.len(),
        targets_acquired: engine.acquired_targets.len(),
        load: engine.load,
    })
}

impl Engine<'_> {
    fn run_all(&mut self) -> Result<()> {
        let boundaries = self.cfg.boundaries();
        for k in 0..boundaries {
            let now = k as f64 * self.cfg.planning_period;
            self.clock.advance(now)?;
            self.prune_tracks(now);
            let plan = self.plan(k, now)?;
            if k + 1 == boundaries {
                for _ in &plan.sync_offsets {
                    self.clock.apply_sync(now)?;
                    self.sync_times.push(now);
                }
                break;
            }
            self.execute(now, &plan)?;
            if self.cfg.error_sampling == ErrorSampling::PerPeriod {
                let end = now + self.cfg.planning_period;
                let truth = self.truth(end);
                let samples = record_errors(&self.tracks, &truth, end);
                self.samples.extend(samples);
            }
        }
        Ok(())
    }

    fn truth(&self, t: f64) -> Vec<(u64, Vector3<f64>)> {
        self.cfg
            .targets
            .iter()
            .enumerate()
            .filter(|(_, tg)| tg.is_alive(t))
            .map(|(i, tg)| (i as u64, tg.position_at(t)))
            .collect()
    }

    /// Remove dropped tracks and tracks that have grown too uncertain.
    fn prune_tracks(&mut self, now: f64) {
        let q = self.cfg.tracker.process_noise;
        let limit = self.cfg.tracking.max_position_std.powi(2);
        self.tracks.retain(|t| {
            if !t.is_alive() {
                return false;
            }
            let p = crate::tracker::predict_covariance(&t.covariance, q, (now - t.last_update).max(0.0));
            p.fixed_view::<3, 3>(0, 0).trace() <= limit
        });
    }

    fn plan(&mut self, k: usize, now: f64) -> Result<PeriodPlan> {
        let cfg = self.cfg;
        let sync_scheme = || SyncScheme::sync_at_start(1, cfg.sync_dwell);
        let last_sync = self.clock.last_sync_time();
        let schemes: Vec<SyncScheme> = match &self.strategy {
            Strategy::Spec(StrategySpec::TBreg { desired_period }) => {
                let sync = k == 0 || time_balance_decide(last_sync, *desired_period, now);
                let offsets = if sync { vec![0.0] } else { Vec::new() };
                return Ok(rule_allocation(cfg, &self.tracks, now, offsets));
            }
            _ if k == 0 => vec![sync_scheme()?],
            Strategy::Spec(StrategySpec::CaseDecision) => vec![SyncScheme::no_sync(0), sync_scheme()?],
            Strategy::Spec(StrategySpec::RegUpdate { period }) => {
                if on_regular_grid(now, *period) {
                    vec![sync_scheme()?]
                } else {
                    vec![SyncScheme::no_sync(0)]
                }
            }
            Strategy::Forced(set) => {
                if set.contains(&k) {
                    vec![sync_scheme()?]
                } else {
                    vec![SyncScheme::no_sync(0)]
                }
            }
        };
        let lists = build_task_set(cfg, now, &self.tracks, &self.search, &SyncErrorProfile::zero(cfg.planning_period))?;
        let bounds = ResourceVector::scalar(cfg.planning_period)?;
        let view = ClockView::from(&self.clock);
        let selection = select_scheme(&schemes, &lists, &bounds, view, cfg.planning_period)?;
        let chosen = selection.chosen;
        Ok(plan_from_allocation(&chosen.job_lists, &chosen.allocation, chosen.scheme.sync_times.clone()))
    }

    fn schedule(&self, now: f64, plan: &PeriodPlan) -> Vec<(DwellKind, f64)> {
        let cfg = self.cfg;
        let planned: BTreeMap<u64, (u32, u32)> = plan.track_dwells.iter().map(|&(id, n, p)| (id, (n, p))).collect();
        let order = urgency_order(cfg, &self.tracks, now);
        let round = |r: u32| -> Vec<(DwellKind, f64)> {
            order
                .iter()
                .filter_map(|id| planned.get(id).filter(|(n, _)| *n > r).map(|&(_, p)| (*id, p)))
                .map(|(track_id, pulses)| (DwellKind::Track { track_id, pulses }, cfg.radar.dwell_duration(pulses)))
                .collect()
        };
        let search = |n: usize| vec![(DwellKind::Search, cfg.search_dwell()); n];
        let first_half = plan.search_beams.div_ceil(2);
        let max_rounds = plan.track_dwells.iter().map(|&(_, n, _)| n).max().unwrap_or(0);
        let mut body = round(0);
        body.extend(search(first_half));
        for r in 1..max_rounds {
            body.extend(round(r));
        }
        body.extend(search(plan.search_beams - first_half));

        // Sync dwells go in at the first dwell boundary at or after their offset.
        let mut out = Vec::with_capacity(body.len() + plan.sync_offsets.len());
        let mut syncs = plan.sync_offsets.iter().peekable();
        let mut cursor = 0.0;
        for item in body {
            while let Some(&&s) = syncs.peek() {
                if s > cursor {
                    break;
                }
                out.push((DwellKind::Sync, cfg.sync_dwell));
                cursor += cfg.sync_dwell;
                syncs.next();
            }
            cursor += item.1;
            out.push(item);
        }
        for _ in syncs {
            out.push((DwellKind::Sync, cfg.sync_dwell));
        }
        out
    }

    fn execute(&mut self, now: f64, plan: &PeriodPlan) -> Result<()> {
        let dwells = self.schedule(now, plan);
        let total: f64 = dwells.iter().map(|d| d.1).sum();
        self.load.periods += 1;
        self.load.max_period_load = self.load.max_period_load.max(total);
        if total > self.cfg.planning_period + BUDGET_EPS {
            self.load.budget_violations += 1;
        }
        let mut start = now;
        for (kind, duration) in dwells {
            match kind {
                DwellKind::Sync => {
                    self.clock.apply_sync(start)?;
                    self.sync_times.push(start);
                    self.load.sync_time += duration;
                }
                DwellKind::Track { track_id, pulses } => {
                    self.track_dwell(track_id, pulses, start + 0.5 * duration)?;
                    self.load.track_time += duration;
                    self.load.track_dwells += 1;
                }
                DwellKind::Search => {
                    let beam = self.search.next_beam();
                    self.search_dwell(beam, start + 0.5 * duration)?;
                    self.load.search_time += duration;
                    self.load.search_dwells += 1;
                }
            }
            start += duration;
        }
        Ok(())
    }

    /// Measurements of every target the beam detects at `time`, in target order.
    fn illuminate(&mut self, pointing: Pointing, pulses: u32, time: f64) -> Result<Vec<MonostaticMeasurement>> {
        self.clock.advance(time)?;
        let offset = self.clock.offset_at(time)?;
        let cfg = self.cfg;
        let mut out = Vec::new();
        for target in cfg.targets.iter().filter(|t| t.is_alive(time)) {
            let pos = target.position_at(time);
            if (pos - self.tx).norm() > cfg.radar.max_range_m {
                continue;
            }
            let s = match snr(&cfg.radar, &pos, target.rcs, pulses, &self.tx, &self.rx, pointing, ReceivePath::Passive) {
                Ok(s) => s,
                Err(_) => continue,
            };
            if s < cfg.radar.detection_threshold() {
                continue;
            }
            let noise = NoiseStds::for_snr(&cfg.radar, s)?;
            let Some(m) = detect(&cfg.radar, s, &pos, &self.tx, &self.rx, &noise, offset, time, &mut self.noise_rng) else {
                continue;
            };
            let mc_seed = self.mc_rng.next_u64();
            let Ok(range) = receiver_range(m.sum_range, m.azimuth, m.elevation, &self.tx, &self.rx) else {
                continue;
            };
            let Ok(covariance) = mc_covariance(&m, &noise, &self.tx, &self.rx, cfg.mc_samples, mc_seed) else {
                continue;
            };
            self.load.detections += 1;
            out.push(MonostaticMeasurement {
                range,
                azimuth: m.azimuth,
                elevation: m.elevation,
                covariance,
                timestamp: time,
            });
        }
        Ok(out)
    }

    fn pointing_at(&self, pos: &Vector3<f64>) -> Pointing {
        let (azimuth, elevation) = az_el(&(pos - self.tx));
        Pointing::Beam { azimuth, elevation }
    }

    fn track_dwell(&mut self, track_id: u64, pulses: u32, time: f64) -> Result<()> {
        let Some(idx) = self.tracks.iter().position(|t| t.track_id == track_id && t.is_alive()) else {
            return Ok(());
        };
        let pointing = self.pointing_at(&self.tracks[idx].position_at(time));
        let measurements = self.illuminate(pointing, pulses, time)?;
        let q = self.cfg.tracker.process_noise;
        let mut best: Option<(f64, usize)> = None;
        for (i, m) in measurements.iter().enumerate() {
            let d2 = self.tracks[idx].innovation_distance(m, &self.rx, q)?;
            if best.is_none_or(|(b, _)| d2 < b) {
                best = Some((d2, i));
            }
        }
        match best {
            Some((_, i)) => self.apply_update(idx, &measurements[i])?,
            None => self.tracks[idx].register_miss(&self.cfg.tracker),
        }
        Ok(())
    }

    fn search_dwell(&mut self, beam: (f64, f64), time: f64) -> Result<()> {
        let pointing = Pointing::Beam {
            azimuth: beam.0,
            elevation: beam.1,
        };
        let measurements = self.illuminate(pointing, self.cfg.radar.search_pulses, time)?;
        let gate = self.cfg.tracker.gate_chi2;
        let q = self.cfg.tracker.process_noise;
        let mut used = BTreeSet::new();
        for m in &measurements {
            let mut best: Option<(f64, usize)> = None;
            for (i, t) in self.tracks.iter().enumerate() {
                if !t.is_alive() || used.contains(&t.track_id) {
                    continue;
                }
                let d2 = t.innovation_distance(m, &self.rx, q)?;
                if d2 <= gate && best.is_none_or(|(b, _)| d2 < b) {
                    best = Some((d2, i));
                }
            }
            match best {
                Some((_, i)) => {
                    used.insert(self.tracks[i].track_id);
                    self.apply_update(i, m)?;
                }
                None => {
                    let track = Track::initiate(self.next_track_id, m, &self.rx, &self.cfg.tracker)?;
                    used.insert(track.track_id);
                    self.next_track_id += 1;
                    self.tracks.push(track);
                }
            }
        }
        Ok(())
    }

    fn apply_update(&mut self, idx: usize, m: &MonostaticMeasurement) -> Result<()> {
        let (track, outcome) = self.tracks[idx].update(m, &self.rx, &self.cfg.tracker)?;
        self.tracks[idx] = track;
        if outcome != UpdateOutcome::Updated || self.tracks[idx].status != TrackStatus::Confirmed {
            return Ok(());
        }
        let truth = self.truth(m.timestamp);
        let samples = record_errors(std::slice::from_ref(&self.tracks[idx]), &truth, m.timestamp);
        if self.confirmed.insert(self.tracks[idx].track_id) {
            if let Some(s) = samples.first() {
                self.acquired_targets.insert(s.target_id);
            }
        }
        if self.cfg.error_sampling == ErrorSampling::PerUpdate {
            self.samples.extend(samples);
        }
        Ok(())
    }
}

/// Planning boundary indices of a list of sync times.
pub fn boundary_indices(config: &ScenarioConfig, sync_times: &[f64]) -> Result<BTreeSet<usize>> {
    sync_times
        .iter()
        .map(|&t| {
            let k = (t / config.planning_period).round();
            if (t - k * config.planning_period).abs() > 1e-9 || k < 0.0 {
                Err(Error::InvalidArgument(format!("sync time {t} is not a planning boundary")))
            } else {
                Ok(k as usize)
            }
        })
        .collect()
}
