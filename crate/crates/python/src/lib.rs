//! Python bindings (`qramsync`). Plain lists, tuples and dicts in and out;
//! core errors surface as `ValueError`.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use nalgebra::Vector3;
use qram_sync::qram::{self, JobList, ResourceVector, TaskConfig, TaskId};
use qram_sync::radar::{self, BistaticMeasurement, NoiseStds};
use qram_sync::sim::{self, ScenarioConfig, StrategySpec};
use qram_sync::stats::Summary;
use qram_sync::sync_planner::{self, SyncScheme};

type Config = (Vec<f64>, f64);

fn err(e: qram_sync::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn vec3(v: [f64; 3]) -> Vector3<f64> {
    Vector3::new(v[0], v[1], v[2])
}

fn job_list(task: u64, configs: Vec<Config>, weights: Option<&[f64]>) -> Result<JobList, qram_sync::Error> {
    let entries = configs
        .into_iter()
        .map(|(r, u)| {
            let ones = vec![1.0; r.len()];
            let w = weights.unwrap_or(&ones);
            TaskConfig::new(TaskId(task), ResourceVector::new(r)?, u, w)
        })
        .collect::<Result<Vec<_>, _>>()?;
    qram::build_job_list(TaskId(task), entries)
}

fn as_pairs(list: &JobList) -> Vec<Config> {
    list.entries()
        .iter()
        .map(|c| (c.resources.components().to_vec(), c.utility))
        .collect()
}

/// Weighted sum of a resource vector.
#[pyfunction]
fn compound(resources: Vec<f64>, weights: Vec<f64>) -> PyResult<f64> {
    qram::compound(&ResourceVector::new(resources).map_err(err)?, &weights).map_err(err)
}

/// Pareto-filtered job list of `(resources, utility)` pairs, ordered by
/// compound resource.
#[pyfunction]
#[pyo3(signature = (configs, weights=None))]
fn build_job_list(configs: Vec<Config>, weights: Option<Vec<f64>>) -> PyResult<Vec<Config>> {
    let list = job_list(0, configs, weights.as_deref()).map_err(err)?;
    Ok(as_pairs(&list))
}

/// Greedy allocation over tasks given as lists of `(resources, utility)`.
/// Task ids are list positions; `selected[i]` indexes `job_lists[i]`.
#[pyfunction]
#[pyo3(signature = (tasks, bounds, weights=None))]
fn greedy_allocate<'py>(
    py: Python<'py>,
    tasks: Vec<Vec<Config>>,
    bounds: Vec<f64>,
    weights: Option<Vec<f64>>,
) -> PyResult<Bound<'py, PyDict>> {
    let lists = tasks
        .into_iter()
        .enumerate()
        .map(|(i, c)| job_list(i as u64, c, weights.as_deref()))
        .collect::<Result<Vec<_>, _>>()
        .map_err(err)?;
    let bounds = ResourceVector::new(bounds).map_err(err)?;
    let a = qram::greedy_allocate(&lists, &bounds).map_err(err)?;
    let selected: Vec<usize> = lists
        .iter()
        .map(|l| a.selected.get(&l.task_id()).copied().unwrap_or(0))
        .collect();
    let out = PyDict::new(py);
    out.set_item("selected", selected)?;
    out.set_item("total_utility", a.total_utility)?;
    out.set_item("total_resources", a.total_resources.components().to_vec())?;
    out.set_item("job_lists", lists.iter().map(as_pairs).collect::<Vec<_>>())?;
    Ok(out)
}

/// `(time, std)` points of the predicted receiver clock error over one
/// planning period.
#[pyfunction]
#[pyo3(signature = (last_sync_age, sync_times, step_bound, period, sync_dwell=0.231))]
fn predict_sync_error(
    last_sync_age: f64,
    sync_times: Vec<f64>,
    step_bound: f64,
    period: f64,
    sync_dwell: f64,
) -> PyResult<Vec<(f64, f64)>> {
    let scheme = SyncScheme::new(0, sync_times, period, sync_dwell).map_err(err)?;
    let p = sync_planner::predict_sync_error(last_sync_age, &scheme, step_bound, period).map_err(err)?;
    Ok(p.points)
}

#[pyfunction]
fn angle_std(snr: f64, beamwidth_3db: f64) -> PyResult<f64> {
    radar::angle_std(snr, beamwidth_3db).map_err(err)
}

/// SNR (linear) of the passive receive path with a centred beam under the
/// default radar parameters.
#[pyfunction]
#[pyo3(signature = (target, rcs, pulses, tx, rx))]
fn snr(target: [f64; 3], rcs: f64, pulses: u32, tx: [f64; 3], rx: [f64; 3]) -> PyResult<f64> {
    radar::snr(
        &radar::RadarParams::default(),
        &vec3(target),
        rcs,
        pulses,
        &vec3(tx),
        &vec3(rx),
        radar::Pointing::Centred,
        radar::ReceivePath::Passive,
    )
    .map_err(err)
}

#[pyfunction]
fn receiver_range(sum_range: f64, azimuth: f64, elevation: f64, tx: [f64; 3], rx: [f64; 3]) -> PyResult<f64> {
    radar::receiver_range(sum_range, azimuth, elevation, &vec3(tx), &vec3(rx)).map_err(err)
}

/// Monte Carlo covariance of (receiver range, azimuth, elevation) as a
/// row-major 3x3 nested list.
#[pyfunction]
#[pyo3(signature = (sum_range, azimuth, elevation, stds, tx, rx, n_samples=500, seed=0))]
#[allow(clippy::too_many_arguments)]
fn mc_covariance(
    sum_range: f64,
    azimuth: f64,
    elevation: f64,
    stds: [f64; 3],
    tx: [f64; 3],
    rx: [f64; 3],
    n_samples: usize,
    seed: u64,
) -> PyResult<Vec<Vec<f64>>> {
    let m = BistaticMeasurement {
        sum_range,
        azimuth,
        elevation,
        snr: f64::NAN,
        timestamp: 0.0,
    };
    let noise = NoiseStds {
        sum_range: stds[0],
        azimuth: stds[1],
        elevation: stds[2],
    };
    let c = radar::mc_covariance(&m, &noise, &vec3(tx), &vec3(rx), n_samples, seed).map_err(err)?;
    Ok((0..3).map(|i| (0..3).map(|j| c[(i, j)]).collect()).collect())
}

#[pyfunction]
fn summary<'py>(py: Python<'py>, samples: Vec<f64>) -> PyResult<Bound<'py, PyDict>> {
    let s = Summary::of(&samples).map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("median", s.median)?;
    out.set_item("min", s.min)?;
    out.set_item("max", s.max)?;
    out.set_item("mean", s.mean)?;
    out.set_item("std", s.std)?;
    out.set_item("count", s.count)?;
    Ok(out)
}

/// Default scenario as TOML.
#[pyfunction]
fn default_config() -> PyResult<String> {
    ScenarioConfig::default().to_toml().map_err(err)
}

/// One simulation run. `strategy` overrides the config's strategy.
#[pyfunction]
#[pyo3(signature = (config_toml, seed, strategy=None))]
fn run_scenario<'py>(py: Python<'py>, config_toml: &str, seed: u64, strategy: Option<&str>) -> PyResult<Bound<'py, PyDict>> {
    let mut cfg = ScenarioConfig::from_toml(config_toml).map_err(err)?;
    if let Some(s) = strategy {
        cfg.strategy = s.parse::<StrategySpec>().map_err(err)?;
    }
    cfg.validate().map_err(err)?;
    let report = py.detach(|| sim::run(&cfg, seed)).map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("strategy", &report.strategy)?;
    out.set_item("seed", report.seed)?;
    out.set_item("sync_times", &report.sync_times)?;
    out.set_item("errors", report.errors())?;
    out.set_item("tracks_confirmed", report.tracks_confirmed)?;
    out.set_item("targets_acquired", report.targets_acquired)?;
    out.set_item("budget_violations", report.load.budget_violations)?;
    Ok(out)
}

#[pymodule]
fn qramsync(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(compound, m)?)?;
    m.add_function(wrap_pyfunction!(build_job_list, m)?)?;
    m.add_function(wrap_pyfunction!(greedy_allocate, m)?)?;
    m.add_function(wrap_pyfunction!(predict_sync_error, m)?)?;
    m.add_function(wrap_pyfunction!(angle_std, m)?)?;
    m.add_function(wrap_pyfunction!(snr, m)?)?;
    m.add_function(wrap_pyfunction!(receiver_range, m)?)?;
    m.add_function(wrap_pyfunction!(mc_covariance, m)?)?;
    m.add_function(wrap_pyfunction!(summary, m)?)?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    Ok(())
}
