//! Q-RAM problem model: tasks, configurations, job lists and the classical
//! greedy global allocator.
//!
//! A task offers a set of configurations, each with a utility and a resource
//! requirement. Job lists keep only the configurations that are not dominated
//! (more resources for no more utility), ordered by increasing compound
//! resource. The allocator starts every task at its cheapest entry and keeps
//! upgrading the task whose next entry buys the most utility per unit of
//! compound resource, as long as every resource bound still holds.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TaskId(pub u64);

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Amount of each resource type, e.g. aperture time in seconds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResourceVector(Vec<f64>);

impl ResourceVector {
    pub fn new(components: Vec<f64>) -> Result<Self> {
        if let Some(&bad) = components.iter().find(|c| !c.is_finite() || **c < 0.0) {
            return Err(Error::InvalidResource(bad));
        }
        Ok(Self(components))
    }

    pub fn zeros(k: usize) -> Self {
        Self(vec![0.0; k])
    }

    /// Single-resource vector.
    pub fn scalar(amount: f64) -> Result<Self> {
        Self::new(vec![amount])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn components(&self) -> &[f64] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0.0)
    }

    /// Component-wise `self <= bounds`.
    pub fn fits_within(&self, bounds: &ResourceVector) -> bool {
        self.0.len() == bounds.0.len() && self.0.iter().zip(&bounds.0).all(|(a, b)| a <= b)
    }

    /// `self - other`, or `None` if any component would become negative.
    pub fn checked_sub(&self, other: &ResourceVector) -> Option<ResourceVector> {
        if self.0.len() != other.0.len() {
            return None;
        }
        let out: Vec<f64> = self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect();
        if out.iter().any(|&c| c < 0.0) {
            None
        } else {
            Some(Self(out))
        }
    }

    pub fn add(&self, other: &ResourceVector) -> Result<ResourceVector> {
        if self.0.len() != other.0.len() {
            return Err(Error::LengthMismatch {
                expected: self.0.len(),
                got: other.0.len(),
            });
        }
        Ok(Self(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect()))
    }
}

/// Dot product of a resource vector with the problem's compound weights.
pub fn compound(resources: &ResourceVector, weights: &[f64]) -> Result<f64> {
    if resources.len() != weights.len() {
        return Err(Error::LengthMismatch {
            expected: resources.len(),
            got: weights.len(),
        });
    }
    if let Some(&bad) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
        return Err(Error::InvalidArgument(format!("compound weight {bad} must be >= 0")));
    }
    Ok(resources.0.iter().zip(weights).map(|(r, w)| r * w).sum())
}

/// How a configuration's quality reacts to the receiver clock error.
///
/// Present on tracking configurations only. The predicted position error is
/// `sqrt(filter_var_m2 + (range_bias_gain * clock_std)^2)` and the utility is
/// `priority * clamp((sigma_max - error) / sigma_max, 0, 1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyncSensitivity {
    /// Predicted filter position variance at the end of the period (m²).
    pub filter_var_m2: f64,
    /// Receiver-range error per second of clock offset (m/s).
    pub range_bias_gain: f64,
    pub priority: f64,
    pub sigma_max_m: f64,
}

impl SyncSensitivity {
    pub fn predicted_error(&self, clock_std_s: f64) -> f64 {
        let bias = self.range_bias_gain * clock_std_s;
        (self.filter_var_m2 + bias * bias).sqrt()
    }

    pub fn utility_for_error(&self, sigma_m: f64) -> f64 {
        if !sigma_m.is_finite() {
            return 0.0;
        }
        ((self.sigma_max_m - sigma_m) / self.sigma_max_m).clamp(0.0, 1.0) * self.priority
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskConfig {
    pub task_id: TaskId,
    /// Named operational parameters (dwell count, pulses, beams, ...).
    pub params: BTreeMap<String, f64>,
    pub quality: f64,
    pub utility: f64,
    pub resources: ResourceVector,
    pub compound_resource: f64,
    pub sync_sensitivity: Option<SyncSensitivity>,
}

impl TaskConfig {
    pub fn new(
        task_id: TaskId,
        resources: ResourceVector,
        utility: f64,
        weights: &[f64],
    ) -> Result<Self> {
        if !utility.is_finite() || utility < 0.0 {
            return Err(Error::InvalidArgument(format!("utility {utility} must be >= 0")));
        }
        let compound_resource = compound(&resources, weights)?;
        Ok(Self {
            task_id,
            params: BTreeMap::new(),
            quality: 0.0,
            utility,
            resources,
            compound_resource,
            sync_sensitivity: None,
        })
    }

    /// Zero-resource, zero-utility configuration.
    pub fn idle(task_id: TaskId, k: usize) -> Self {
        Self {
            task_id,
            params: BTreeMap::new(),
            quality: 0.0,
            utility: 0.0,
            resources: ResourceVector::zeros(k),
            compound_resource: 0.0,
            sync_sensitivity: None,
        }
    }

    pub fn with_param(mut self, name: &str, value: f64) -> Self {
        self.params.insert(name.to_string(), value);
        self
    }

    pub fn with_quality(mut self, quality: f64) -> Self {
        self.quality = quality;
        self
    }

    pub fn with_sync_sensitivity(mut self, s: SyncSensitivity) -> Self {
        self.sync_sensitivity = Some(s);
        self
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.get(name).copied()
    }
}

/// Pareto-filtered configurations of one task, cheapest first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JobList {
    task_id: TaskId,
    entries: Vec<TaskConfig>,
}

impl JobList {
    pub fn task_id(&self) -> TaskId {
        self.task_id
    }

    pub fn entries(&self) -> &[TaskConfig] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn into_entries(self) -> Vec<TaskConfig> {
        self.entries
    }
}

/// Keep the undominated configurations, sorted by compound resource, with an
/// idle entry in front when no zero-cost configuration exists.
pub fn build_job_list(task_id: TaskId, configs: Vec<TaskConfig>) -> Result<JobList> {
    if configs.is_empty() {
        return Err(Error::NoConfigurations);
    }
    if let Some(c) = configs.iter().find(|c| c.task_id != task_id) {
        return Err(Error::MixedTaskIds {
            expected: task_id.0,
            found: c.task_id.0,
        });
    }
    let k = configs[0].resources.len();
    if let Some(c) = configs.iter().find(|c| c.resources.len() != k) {
        return Err(Error::LengthMismatch {
            expected: k,
            got: c.resources.len(),
        });
    }

    let mut sorted = configs;
    // Cheapest first; among equal cost the best utility comes first so the
    // sweep below keeps it.
    sorted.sort_by(|a, b| {
        a.compound_resource
            .total_cmp(&b.compound_resource)
            .then(b.utility.total_cmp(&a.utility))
    });

    let mut entries: Vec<TaskConfig> = Vec::with_capacity(sorted.len() + 1);
    if sorted[0].compound_resource > 0.0 {
        entries.push(TaskConfig::idle(task_id, k));
    }
    for config in sorted {
        match entries.last() {
            Some(last) if config.utility <= last.utility => {}
            Some(last) if config.compound_resource <= last.compound_resource => {}
            _ => entries.push(config),
        }
    }
    Ok(JobList { task_id, entries })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    /// Index into each task's job list.
    pub selected: BTreeMap<TaskId, usize>,
    pub total_utility: f64,
    pub total_resources: ResourceVector,
    /// Tasks in the order they were upgraded.
    pub upgrade_sequence: Vec<TaskId>,
}

impl Allocation {
    pub fn selected_entry<'a>(&self, job_lists: &'a [JobList], task: TaskId) -> Option<&'a TaskConfig> {
        let idx = *self.selected.get(&task)?;
        job_lists
            .iter()
            .find(|j| j.task_id == task)
            .and_then(|j| j.entries.get(idx))
    }
}

fn sum_selected(lists: &[&JobList], picks: &[usize], k: usize) -> Vec<f64> {
    let mut total = vec![0.0; k];
    for (list, &idx) in lists.iter().zip(picks) {
        for (t, r) in total.iter_mut().zip(list.entries[idx].resources.components()) {
            *t += r;
        }
    }
    total
}

fn within(total: &[f64], bounds: &[f64]) -> bool {
    total.iter().zip(bounds).all(|(t, b)| t <= b)
}

/// Classical Q-RAM greedy: repeatedly upgrade the task with the best marginal
/// utility per marginal compound resource among the feasible upgrades.
///
/// Ties go to the lowest task id. Resource totals are always recomputed in
/// task-id order, so the returned `total_resources` is exactly the sum that
/// passed the final feasibility check.
pub fn greedy_allocate(job_lists: &[JobList], bounds: &ResourceVector) -> Result<Allocation> {
    let k = bounds.len();
    let mut lists: Vec<&JobList> = job_lists.iter().collect();
    lists.sort_by_key(|j| j.task_id);
    let mut seen = BTreeSet::new();
    for list in &lists {
        if !seen.insert(list.task_id) {
            return Err(Error::DuplicateTask(list.task_id.0));
        }
        if list.entries.is_empty() {
            return Err(Error::NoConfigurations);
        }
        if let Some(e) = list.entries.iter().find(|e| e.resources.len() != k) {
            return Err(Error::LengthMismatch {
                expected: k,
                got: e.resources.len(),
            });
        }
    }

    let bound = bounds.components();
    let mut picks = vec![0usize; lists.len()];
    if !within(&sum_selected(&lists, &picks, k), bound) {
        return Err(Error::InfeasibleBaseline);
    }

    let mut upgrade_sequence = Vec::new();
    loop {
        let mut best: Option<(usize, f64)> = None;
        for (i, list) in lists.iter().enumerate() {
            let cur = picks[i];
            if cur + 1 >= list.entries.len() {
                continue;
            }
            let (a, b) = (&list.entries[cur], &list.entries[cur + 1]);
            let du = b.utility - a.utility;
            let dc = b.compound_resource - a.compound_resource;
            let ratio = if dc > 0.0 { du / dc } else { f64::INFINITY };
            if best.is_none_or(|(_, r)| ratio > r) {
                picks[i] += 1;
                let feasible = within(&sum_selected(&lists, &picks, k), bound);
                picks[i] -= 1;
                if feasible {
                    best = Some((i, ratio));
                }
            }
        }
        match best {
            Some((i, _)) => {
                picks[i] += 1;
                upgrade_sequence.push(lists[i].task_id);
            }
            None => break,
        }
    }

    let total_resources = ResourceVector(sum_selected(&lists, &picks, k));
    let total_utility = lists
        .iter()
        .zip(&picks)
        .map(|(l, &i)| l.entries[i].utility)
        .sum();
    Ok(Allocation {
        selected: lists.iter().map(|l| l.task_id).zip(picks).collect(),
        total_utility,
        total_resources,
        upgrade_sequence,
    })
}
