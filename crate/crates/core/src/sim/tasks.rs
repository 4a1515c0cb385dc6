//! Task set of one planning period: the search fence and one task per track.

use std::cmp::Ordering;

use nalgebra::{Matrix6, Vector3};
use serde::{Deserialize, Serialize};

use crate::clock::C0;
use crate::error::Result;
use crate::qram::{build_job_list, Allocation, JobList, ResourceVector, SyncSensitivity, TaskConfig, TaskId};
use crate::radar::{angle_std, az_el, range_sensitivity, snr, sum_range, Pointing, ReceivePath};
use crate::sim::config::ScenarioConfig;
use crate::sync_planner::{rebuild_utilities, SyncErrorProfile};
use crate::tracker::{cartesian_noise, predict_covariance, updated_covariance, Track};

/// Task id of the search fence; tracks use their track id (>= 1).
pub const SEARCH_TASK: TaskId = TaskId(0);

/// Raster over the search fence, cycling in azimuth-major order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchState {
    /// Beam centres (azimuth, elevation) in radians, as seen from the transmitter.
    pub beams: Vec<(f64, f64)>,
    pub cursor: usize,
}

impl SearchState {
    pub fn new(cfg: &ScenarioConfig) -> Self {
        let s = &cfg.search;
        let az_step = 2.0 * s.fence_az_half_deg / s.az_beams as f64;
        let el_step = s.fence_el_deg / s.el_beams as f64;
        let mut beams = Vec::with_capacity(s.az_beams * s.el_beams);
        for i in 0..s.az_beams {
            for j in 0..s.el_beams {
                let az = -s.fence_az_half_deg + (i as f64 + 0.5) * az_step;
                let el = (j as f64 + 0.5) * el_step;
                beams.push((az.to_radians(), el.to_radians()));
            }
        }
        Self { beams, cursor: 0 }
    }

    /// The next beam of the raster.
    pub fn next_beam(&mut self) -> (f64, f64) {
        let b = self.beams[self.cursor];
        self.cursor = (self.cursor + 1) % self.beams.len();
        b
    }
}

/// Dwells committed for one planning period.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PeriodPlan {
    /// Offsets of sync dwells from the period start (s).
    pub sync_offsets: Vec<f64>,
    /// (track id, dwells this period, pulses per dwell).
    pub track_dwells: Vec<(u64, u32, u32)>,
    pub search_beams: usize,
    /// Q-RAM system utility, absent for rule-based plans.
    pub system_utility: Option<f64>,
}

/// Predicted position variance (trace) of `track` at the end of the period
/// starting at `now`, after `dwells` evenly spaced updates of `pulses` each.
pub fn predicted_position_variance(cfg: &ScenarioConfig, track: &Track, now: f64, dwells: u32, pulses: u32) -> f64 {
    let (tx, rx) = (cfg.tx(), cfg.rx());
    let q = cfg.tracker.process_noise;
    let period = cfg.planning_period;
    let mut p: Matrix6<f64> = track.covariance;
    let mut t = track.last_update;
    for j in 0..dwells {
        let tj = now + (j as f64 + 0.5) * period / dwells as f64;
        if tj > t {
            p = predict_covariance(&p, q, tj - t);
            t = tj;
        }
        let pos = track.position_at(tj);
        if let Some(r) = predicted_measurement_noise(cfg, &pos, pulses, &tx, &rx) {
            p = updated_covariance(&p, &r).unwrap_or(p);
        }
    }
    let end = now + period;
    if end > t {
        p = predict_covariance(&p, q, end - t);
    }
    p.fixed_view::<3, 3>(0, 0).trace()
}

/// Cartesian measurement noise of a dwell on `pos`, or `None` when the
/// dwell would not detect a target of the planning RCS there.
fn predicted_measurement_noise(
    cfg: &ScenarioConfig,
    pos: &Vector3<f64>,
    pulses: u32,
    tx: &Vector3<f64>,
    rx: &Vector3<f64>,
) -> Option<nalgebra::Matrix3<f64>> {
    if (pos - tx).norm() > cfg.radar.max_range_m {
        return None;
    }
    let s = snr(&cfg.radar, pos, cfg.tracking.planning_rcs, pulses, tx, rx, Pointing::Centred, ReceivePath::Passive).ok()?;
    if s < cfg.radar.detection_threshold() {
        return None;
    }
    let (az, el) = az_el(&(pos - rx));
    let gain = range_sensitivity(sum_range(pos, tx, rx), az, el, tx, rx).ok()?.abs();
    let az_std = angle_std(s, cfg.radar.rx_beamwidth_az_deg.to_radians()).ok()?;
    let el_std = angle_std(s, cfg.radar.rx_beamwidth_el_deg.to_radians()).ok()?;
    Some(cartesian_noise(pos, rx, gain * cfg.radar.range_std_m, az_std, el_std))
}

/// Sum-range bias to receiver-range bias factor, in metres per second of
/// clock offset.
fn range_bias_gain(cfg: &ScenarioConfig, pos: &Vector3<f64>) -> f64 {
    let (tx, rx) = (cfg.tx(), cfg.rx());
    let (az, el) = az_el(&(pos - rx));
    C0 * range_sensitivity(sum_range(pos, &tx, &rx), az, el, &tx, &rx)
        .map(f64::abs)
        .unwrap_or(1.0)
}

/// Largest number of search beams that fits into one planning period.
pub fn max_search_beams(cfg: &ScenarioConfig) -> usize {
    (cfg.planning_period / cfg.search_dwell() + 1e-9).floor() as usize
}

fn search_job_list(cfg: &ScenarioConfig) -> Result<JobList> {
    let dwell = cfg.search_dwell();
    let configs = (0..=max_search_beams(cfg))
        .map(|b| {
            let time = b as f64 * dwell;
            let utility = cfg.search.utility_weight * time / cfg.planning_period;
            Ok(TaskConfig::new(SEARCH_TASK, ResourceVector::scalar(time)?, utility, &[1.0])?
                .with_param("beams", b as f64)
                .with_quality(time / cfg.search.unloaded_full_update))
        })
        .collect::<Result<Vec<_>>>()?;
    build_job_list(SEARCH_TASK, configs)
}

fn track_job_list(cfg: &ScenarioConfig, track: &Track, now: f64) -> Result<JobList> {
    let id = TaskId(track.track_id);
    let gain = range_bias_gain(cfg, &track.position_at(now + 0.5 * cfg.planning_period));
    let sensitivity = |var: f64| SyncSensitivity {
        filter_var_m2: var,
        range_bias_gain: gain,
        priority: cfg.tracking.priority,
        sigma_max_m: cfg.tracking.sigma_max,
    };
    let mut options = vec![(0u32, 0u32)];
    for n in 1..=cfg.tracking.max_dwells {
        for &pulses in &cfg.tracking.pulse_options {
            options.push((n, pulses));
        }
    }
    let configs = options
        .into_iter()
        .map(|(n, pulses)| {
            let var = predicted_position_variance(cfg, track, now, n, pulses);
            let s = sensitivity(var);
            let sigma = s.predicted_error(0.0);
            let time = n as f64 * cfg.radar.dwell_duration(pulses);
            Ok(TaskConfig::new(id, ResourceVector::scalar(time)?, s.utility_for_error(sigma), &[1.0])?
                .with_param("dwells", n as f64)
                .with_param("pulses", pulses as f64)
                .with_quality(sigma)
                .with_sync_sensitivity(s))
        })
        .collect::<Result<Vec<_>>>()?;
    build_job_list(id, configs)
}

/// Job lists of the search task and every live track, with track utilities
/// evaluated for the given clock-error profile.
pub fn build_task_set(
    cfg: &ScenarioConfig,
    now: f64,
    tracks: &[Track],
    _search: &SearchState,
    profile: &SyncErrorProfile,
) -> Result<Vec<JobList>> {
    let mut lists = vec![search_job_list(cfg)?];
    for track in tracks.iter().filter(|t| t.is_alive()) {
        lists.push(track_job_list(cfg, track, now)?);
    }
    if profile.rms() == 0.0 {
        Ok(lists)
    } else {
        rebuild_utilities(&lists, profile)
    }
}

/// Dwells selected by a Q-RAM allocation.
pub fn plan_from_allocation(job_lists: &[JobList], allocation: &Allocation, sync_offsets: Vec<f64>) -> PeriodPlan {
    let mut plan = PeriodPlan {
        sync_offsets,
        system_utility: Some(allocation.total_utility),
        ..Default::default()
    };
    for list in job_lists {
        let Some(entry) = allocation.selected_entry(job_lists, list.task_id()) else {
            continue;
        };
        if list.task_id() == SEARCH_TASK {
            plan.search_beams = entry.param("beams").unwrap_or(0.0) as usize;
        } else {
            let n = entry.param("dwells").unwrap_or(0.0) as u32;
            let pulses = entry.param("pulses").unwrap_or(0.0) as u32;
            if n > 0 {
                plan.track_dwells.push((list.task_id().0, n, pulses));
            }
        }
    }
    plan
}

/// Tracks ordered by decreasing predicted position variance at `now`, ties
/// by track id.
pub fn urgency_order(cfg: &ScenarioConfig, tracks: &[Track], now: f64) -> Vec<u64> {
    let mut keyed: Vec<(f64, u64)> = tracks
        .iter()
        .filter(|t| t.is_alive())
        .map(|t| {
            let p = predict_covariance(&t.covariance, cfg.tracker.process_noise, (now - t.last_update).max(0.0));
            (p.fixed_view::<3, 3>(0, 0).trace(), t.track_id)
        })
        .collect();
    keyed.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1)));
    keyed.into_iter().map(|(_, id)| id).collect()
}

/// Fixed-priority baseline: one dwell per track per period in urgency
/// order, the remainder to search.
pub fn rule_allocation(cfg: &ScenarioConfig, tracks: &[Track], now: f64, sync_offsets: Vec<f64>) -> PeriodPlan {
    let mut remaining = cfg.planning_period - sync_offsets.len() as f64 * cfg.sync_dwell;
    let dwell = cfg.radar.dwell_duration(cfg.tracking.rule_pulses);
    let mut track_dwells = Vec::new();
    for id in urgency_order(cfg, tracks, now) {
        if dwell <= remaining + 1e-12 {
            remaining -= dwell;
            track_dwells.push((id, 1, cfg.tracking.rule_pulses));
        }
    }
    let search_beams = ((remaining.max(0.0) / cfg.search_dwell()) + 1e-9).floor() as usize;
    PeriodPlan {
        sync_offsets,
        track_dwells,
        search_beams: search_beams.min(max_search_beams(cfg)),
        system_utility: None,
    }
}
