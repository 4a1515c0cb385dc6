//! Adaptive synchronisation-scheme selection.
//!
//! Every candidate scheme for the coming planning period gets its own Q-RAM
//! run: the scheme's sync dwells are taken off the budget, the tracking
//! utilities are recomputed for the clock error the scheme leaves behind, and
//! the greedy allocator distributes what is left. The scheme whose allocation
//! reaches the highest system utility wins. Sync dwells carry no utility of
//! their own; they only pay off through better tracking quality.
//!
//! The evaluations are independent of each other, so they may run in any
//! order or in parallel; the reduction is a deterministic argmax.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clock::ClockState;
use crate::error::{Error, Result};
use crate::qram::{build_job_list, greedy_allocate, Allocation, JobList, ResourceVector};

/// Number of evaluation intervals of a predicted error profile.
pub const PROFILE_INTERVALS: usize = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyncScheme {
    pub scheme_id: u32,
    /// Offsets of the sync dwells from the start of the planning period (s).
    pub sync_times: Vec<f64>,
    pub resource_cost: ResourceVector,
}

impl SyncScheme {
    /// Scheme with sync dwells at `sync_times`, costing `sync_dwell` seconds
    /// of aperture time each (single time resource).
    pub fn new(scheme_id: u32, mut sync_times: Vec<f64>, planning_period: f64, sync_dwell: f64) -> Result<Self> {
        sync_times.sort_by(f64::total_cmp);
        if sync_times.iter().any(|&t| !(0.0..planning_period).contains(&t)) {
            return Err(Error::InvalidArgument(format!(
                "sync times must lie in [0, {planning_period})"
            )));
        }
        let cost = ResourceVector::scalar(sync_times.len() as f64 * sync_dwell)?;
        Ok(Self {
            scheme_id,
            sync_times,
            resource_cost: cost,
        })
    }

    pub fn no_sync(scheme_id: u32) -> Self {
        Self {
            scheme_id,
            sync_times: Vec::new(),
            resource_cost: ResourceVector::zeros(1),
        }
    }

    /// One sync dwell at the start of the period.
    pub fn sync_at_start(scheme_id: u32, sync_dwell: f64) -> Result<Self> {
        Ok(Self {
            scheme_id,
            sync_times: vec![0.0],
            resource_cost: ResourceVector::scalar(sync_dwell)?,
        })
    }

    pub fn syncs(&self) -> bool {
        !self.sync_times.is_empty()
    }

    fn cost_sum(&self) -> f64 {
        self.resource_cost.components().iter().sum()
    }
}

/// Predicted standard deviation of the receiver clock offset over a
/// planning period.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyncErrorProfile {
    /// (offset from period start in s, std of ΔT in s).
    pub points: Vec<(f64, f64)>,
}

impl SyncErrorProfile {
    pub fn zero(horizon: f64) -> Self {
        Self {
            points: (0..=PROFILE_INTERVALS)
                .map(|j| (horizon * j as f64 / PROFILE_INTERVALS as f64, 0.0))
                .collect(),
        }
    }

    /// Root mean square of the profile values.
    pub fn rms(&self) -> f64 {
        if self.points.is_empty() {
            return 0.0;
        }
        (self.points.iter().map(|(_, s)| s * s).sum::<f64>() / self.points.len() as f64).sqrt()
    }

    /// Profile with every value multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            points: self.points.iter().map(|&(t, s)| (t, s * factor)).collect(),
        }
    }
}

/// What the planner knows about the receiver clock: time since the last sync
/// and the drift step bound. The true offset is not observable.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClockView {
    pub last_sync_age: f64,
    pub step_bound: f64,
}

impl From<&ClockState> for ClockView {
    fn from(c: &ClockState) -> Self {
        Self {
            last_sync_age: c.sync_age(),
            step_bound: c.step_bound(),
        }
    }
}

/// Random-walk error std `d sqrt(N/3)`, where N is the time since the most
/// recent sync at or before each evaluation time.
pub fn predict_sync_error(last_sync_age: f64, scheme: &SyncScheme, step_bound: f64, horizon: f64) -> Result<SyncErrorProfile> {
    if !(horizon >= 0.0) {
        return Err(Error::NegativeHorizon(horizon));
    }
    if !(last_sync_age >= 0.0) {
        return Err(Error::InvalidArgument(format!("last sync age {last_sync_age} must be >= 0")));
    }
    if !(step_bound >= 0.0) {
        return Err(Error::InvalidArgument(format!("drift step bound {step_bound} must be >= 0")));
    }
    let points = (0..=PROFILE_INTERVALS)
        .map(|j| {
            let t = horizon * j as f64 / PROFILE_INTERVALS as f64;
            let age = match scheme.sync_times.iter().rev().find(|&&s| s <= t) {
                Some(&s) => t - s,
                None => last_sync_age + t,
            };
            (t, step_bound * (age / 3.0).sqrt())
        })
        .collect();
    Ok(SyncErrorProfile { points })
}

/// Recompute the utility of every sync-sensitive configuration for the given
/// clock error profile and re-filter the job lists. Lists without
/// sync-sensitive entries are returned unchanged.
pub fn rebuild_utilities(job_lists: &[JobList], profile: &SyncErrorProfile) -> Result<Vec<JobList>> {
    let clock_std = profile.rms();
    job_lists
        .iter()
        .map(|list| {
            if list.entries().iter().all(|e| e.sync_sensitivity.is_none()) {
                return Ok(list.clone());
            }
            let entries = list
                .entries()
                .iter()
                .map(|e| {
                    let mut e = e.clone();
                    if let Some(s) = &e.sync_sensitivity {
                        let sigma = s.predicted_error(clock_std);
                        e.quality = sigma;
                        e.utility = s.utility_for_error(sigma);
                    }
                    e
                })
                .collect();
            build_job_list(list.task_id(), entries)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchemeEvaluation {
    pub scheme_id: u32,
    pub scheme: SyncScheme,
    /// Job lists after the utility rebuild; `allocation` indexes into these.
    pub job_lists: Vec<JobList>,
    pub allocation: Allocation,
    pub system_utility: f64,
    pub predicted_sync_error_profile: SyncErrorProfile,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchemeSelection {
    pub chosen: SchemeEvaluation,
    /// Every feasible scheme, in input order.
    pub evaluations: Vec<SchemeEvaluation>,
    /// Schemes whose cost exceeded the bounds.
    pub infeasible: Vec<u32>,
}

/// Q-RAM run for one scheme, or `None` when its cost does not fit.
pub fn evaluate_scheme(
    scheme: &SyncScheme,
    job_lists: &[JobList],
    bounds: &ResourceVector,
    clock: ClockView,
    planning_period: f64,
) -> Result<Option<SchemeEvaluation>> {
    let Some(remaining) = bounds.checked_sub(&scheme.resource_cost) else {
        return Ok(None);
    };
    let profile = predict_sync_error(clock.last_sync_age, scheme, clock.step_bound, planning_period)?;
    let rebuilt = rebuild_utilities(job_lists, &profile)?;
    let allocation = match greedy_allocate(&rebuilt, &remaining) {
        Ok(a) => a,
        Err(Error::InfeasibleBaseline) => return Ok(None),
        Err(e) => return Err(e),
    };
    Ok(Some(SchemeEvaluation {
        scheme_id: scheme.scheme_id,
        scheme: scheme.clone(),
        system_utility: allocation.total_utility,
        job_lists: rebuilt,
        allocation,
        predicted_sync_error_profile: profile,
    }))
}

fn better(a: &SchemeEvaluation, b: &SchemeEvaluation) -> bool {
    if a.system_utility != b.system_utility {
        return a.system_utility > b.system_utility;
    }
    let (ca, cb) = (a.scheme.cost_sum(), b.scheme.cost_sum());
    if ca != cb {
        return ca < cb;
    }
    a.scheme_id < b.scheme_id
}

fn reduce(outcomes: Vec<(u32, Option<SchemeEvaluation>)>) -> Result<SchemeSelection> {
    let mut evaluations = Vec::new();
    let mut infeasible = Vec::new();
    for (id, eval) in outcomes {
        match eval {
            Some(e) => evaluations.push(e),
            None => infeasible.push(id),
        }
    }
    let mut best: Option<&SchemeEvaluation> = None;
    for e in &evaluations {
        if best.is_none_or(|b| better(e, b)) {
            best = Some(e);
        }
    }
    let chosen = best.cloned().ok_or(Error::NoFeasibleScheme)?;
    Ok(SchemeSelection {
        chosen,
        evaluations,
        infeasible,
    })
}

/// Pick the scheme with the highest system utility. Ties go to the cheaper
/// scheme, then to the lower scheme id.
pub fn select_scheme(
    schemes: &[SyncScheme],
    job_lists: &[JobList],
    bounds: &ResourceVector,
    clock: ClockView,
    planning_period: f64,
) -> Result<SchemeSelection> {
    if schemes.is_empty() {
        return Err(Error::NoFeasibleScheme);
    }
    let outcomes = schemes
        .iter()
        .map(|s| Ok((s.scheme_id, evaluate_scheme(s, job_lists, bounds, clock, planning_period)?)))
        .collect::<Result<Vec<_>>>()?;
    reduce(outcomes)
}

/// [`select_scheme`] with the per-scheme Q-RAM runs on the rayon pool.
pub fn select_scheme_parallel(
    schemes: &[SyncScheme],
    job_lists: &[JobList],
    bounds: &ResourceVector,
    clock: ClockView,
    planning_period: f64,
) -> Result<SchemeSelection> {
    if schemes.is_empty() {
        return Err(Error::NoFeasibleScheme);
    }
    let outcomes = schemes
        .par_iter()
        .map(|s| Ok((s.scheme_id, evaluate_scheme(s, job_lists, bounds, clock, planning_period)?)))
        .collect::<Result<Vec<_>>>()?;
    reduce(outcomes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qram::{SyncSensitivity, TaskConfig, TaskId};

    const D: f64 = 1e-6;

    fn track_list(task: u64, gain: f64, points: &[(f64, f64)]) -> JobList {
        // points: (dwell time, filter std)
        let configs = points
            .iter()
            .map(|&(r, sigma_f)| {
                let s = SyncSensitivity {
                    filter_var_m2: sigma_f * sigma_f,
                    range_bias_gain: gain,
                    priority: 1.0,
                    sigma_max_m: 30_000.0,
                };
                let sigma = s.predicted_error(0.0);
                TaskConfig::new(TaskId(task), ResourceVector::scalar(r).unwrap(), s.utility_for_error(sigma), &[1.0])
                    .unwrap()
                    .with_quality(sigma)
                    .with_sync_sensitivity(s)
            })
            .collect();
        build_job_list(TaskId(task), configs).unwrap()
    }

    fn search_list(task: u64, per_second: f64, beams: usize, beam_time: f64) -> JobList {
        let configs = (0..=beams)
            .map(|b| {
                let r = b as f64 * beam_time;
                TaskConfig::new(TaskId(task), ResourceVector::scalar(r).unwrap(), per_second * r, &[1.0]).unwrap()
            })
            .collect();
        build_job_list(TaskId(task), configs).unwrap()
    }

    #[test]
    fn profile_examples() {
        let none = SyncScheme::no_sync(0);
        let p = predict_sync_error(0.0, &none, D, 3.0).unwrap();
        let (t, s) = *p.points.last().unwrap();
        assert_eq!(t, 3.0);
        assert!((s - D).abs() < 1e-18);

        let at0 = SyncScheme::sync_at_start(1, 0.231).unwrap();
        let p = predict_sync_error(12.0, &at0, D, 1.0).unwrap();
        assert!((p.points.last().unwrap().1 - D * (1.0f64 / 3.0).sqrt()).abs() < 1e-18);
        assert_eq!(p.points[0].1, 0.0);

        let p = predict_sync_error(5.0, &none, 0.0, 1.0).unwrap();
        assert!(p.points.iter().all(|&(_, s)| s == 0.0));

        assert_eq!(predict_sync_error(0.0, &none, D, -1.0), Err(Error::NegativeHorizon(-1.0)));
    }

    #[test]
    fn profile_mid_period_sync() {
        let s = SyncScheme::new(2, vec![0.5], 1.0, 0.231).unwrap();
        let p = predict_sync_error(2.0, &s, D, 1.0).unwrap();
        // t = 0.25 uses age 2.25, t = 0.75 uses age 0.25
        assert!((p.points[1].1 - D * (2.25f64 / 3.0).sqrt()).abs() < 1e-18);
        assert!((p.points[3].1 - D * (0.25f64 / 3.0).sqrt()).abs() < 1e-18);
        assert!(SyncScheme::new(3, vec![1.0], 1.0, 0.231).is_err());
    }

    #[test]
    fn zero_profile_leaves_lists_unchanged() {
        let lists = vec![track_list(1, 150e6, &[(0.0, 900.0), (0.04, 300.0), (0.08, 200.0)]), search_list(0, 0.01, 12, 1.0 / 12.0)];
        let rebuilt = rebuild_utilities(&lists, &SyncErrorProfile::zero(1.0)).unwrap();
        assert_eq!(rebuilt, lists);
    }

    #[test]
    fn larger_clock_error_never_raises_utility() {
        let list = track_list(1, 150e6, &[(0.0, 900.0), (0.04, 300.0), (0.08, 200.0)]);
        let small = predict_sync_error(1.0, &SyncScheme::no_sync(0), D, 1.0).unwrap();
        let large = predict_sync_error(9.0, &SyncScheme::no_sync(0), D, 1.0).unwrap();
        let a = rebuild_utilities(std::slice::from_ref(&list), &small).unwrap();
        let b = rebuild_utilities(std::slice::from_ref(&list), &large).unwrap();
        for (ea, eb) in a[0].entries().iter().zip(b[0].entries()) {
            assert!(ea.utility >= eb.utility);
        }
        let huge = rebuild_utilities(&[list], &small.scaled(1e6)).unwrap();
        assert!(huge[0].entries().iter().all(|e| e.utility < 1e-9));
    }

    #[test]
    fn search_lists_untouched_by_rebuild() {
        let lists = vec![search_list(0, 0.01, 12, 1.0 / 12.0)];
        let p = predict_sync_error(30.0, &SyncScheme::no_sync(0), D, 1.0).unwrap();
        assert_eq!(rebuild_utilities(&lists, &p).unwrap(), lists);
    }

    #[test]
    fn fresh_clock_prefers_no_sync() {
        let lists = vec![
            track_list(1, 150e6, &[(0.0, 900.0), (0.04, 300.0), (0.08, 200.0)]),
            search_list(0, 0.01, 12, 1.0 / 12.0),
        ];
        let schemes = [SyncScheme::no_sync(0), SyncScheme::sync_at_start(1, 0.231).unwrap()];
        let clock = ClockView {
            last_sync_age: 0.0,
            step_bound: D,
        };
        let sel = select_scheme(&schemes, &lists, &ResourceVector::scalar(1.0).unwrap(), clock, 1.0).unwrap();
        assert_eq!(sel.chosen.scheme_id, 0);
        assert_eq!(sel.evaluations.len(), 2);
        assert!(sel.evaluations[0].system_utility > sel.evaluations[1].system_utility);
    }

    #[test]
    fn stale_clock_with_many_tracks_prefers_sync() {
        let mut lists: Vec<JobList> = (1..=6)
            .map(|i| track_list(i, 150e6, &[(0.0, 400.0), (0.04, 150.0), (0.08, 120.0)]))
            .collect();
        lists.push(search_list(0, 0.01, 12, 1.0 / 12.0));
        let schemes = [SyncScheme::no_sync(0), SyncScheme::sync_at_start(1, 0.231).unwrap()];
        let clock = ClockView {
            last_sync_age: 20.0,
            step_bound: D,
        };
        let sel = select_scheme(&schemes, &lists, &ResourceVector::scalar(1.0).unwrap(), clock, 1.0).unwrap();
        assert_eq!(sel.chosen.scheme_id, 1);
    }

    #[test]
    fn singleton_scheme_is_returned() {
        let lists = vec![search_list(0, 0.01, 12, 1.0 / 12.0)];
        let s = [SyncScheme::sync_at_start(4, 0.231).unwrap()];
        let clock = ClockView {
            last_sync_age: 3.0,
            step_bound: D,
        };
        let sel = select_scheme(&s, &lists, &ResourceVector::scalar(1.0).unwrap(), clock, 1.0).unwrap();
        assert_eq!(sel.chosen.scheme_id, 4);
    }

    #[test]
    fn equal_utility_tie_goes_to_cheaper_scheme() {
        // Nothing to spend the budget on: both schemes reach the same utility.
        let lists = vec![track_list(1, 0.0, &[(0.0, 500.0), (0.05, 300.0)])];
        let schemes = [SyncScheme::sync_at_start(0, 0.231).unwrap(), SyncScheme::no_sync(1)];
        let clock = ClockView {
            last_sync_age: 2.0,
            step_bound: D,
        };
        let sel = select_scheme(&schemes, &lists, &ResourceVector::scalar(1.0).unwrap(), clock, 1.0).unwrap();
        assert_eq!(sel.evaluations[0].system_utility, sel.evaluations[1].system_utility);
        assert_eq!(sel.chosen.scheme_id, 1);
    }

    #[test]
    fn infeasible_schemes_are_skipped() {
        let lists = vec![search_list(0, 0.01, 2, 0.05)];
        let schemes = [SyncScheme::sync_at_start(0, 0.231).unwrap()];
        let clock = ClockView {
            last_sync_age: 2.0,
            step_bound: D,
        };
        let err = select_scheme(&schemes, &lists, &ResourceVector::scalar(0.2).unwrap(), clock, 1.0).unwrap_err();
        assert_eq!(err, Error::NoFeasibleScheme);
        let both = [SyncScheme::sync_at_start(0, 0.231).unwrap(), SyncScheme::no_sync(1)];
        let sel = select_scheme(&both, &lists, &ResourceVector::scalar(0.2).unwrap(), clock, 1.0).unwrap();
        assert_eq!(sel.infeasible, vec![0]);
        assert_eq!(sel.chosen.scheme_id, 1);
    }

    #[test]
    fn parallel_and_sequential_agree() {
        let mut lists: Vec<JobList> = (1..=4)
            .map(|i| track_list(i, 150e6, &[(0.0, 400.0 + i as f64), (0.04, 150.0), (0.08, 120.0)]))
            .collect();
        lists.push(search_list(0, 0.01, 12, 1.0 / 12.0));
        let schemes: Vec<SyncScheme> = (0..6u32)
            .map(|i| SyncScheme::new(i, (0..i % 3).map(|k| k as f64 * 0.3).collect(), 1.0, 0.231).unwrap())
            .collect();
        let clock = ClockView {
            last_sync_age: 7.0,
            step_bound: D,
        };
        let b = ResourceVector::scalar(1.0).unwrap();
        let a = select_scheme(&schemes, &lists, &b, clock, 1.0).unwrap();
        let p = select_scheme_parallel(&schemes, &lists, &b, clock, 1.0).unwrap();
        assert_eq!(a, p);
        let mut reversed = schemes.clone();
        reversed.reverse();
        let r = select_scheme(&reversed, &lists, &b, clock, 1.0).unwrap();
        assert_eq!(r.chosen.scheme_id, a.chosen.scheme_id);
    }
}
