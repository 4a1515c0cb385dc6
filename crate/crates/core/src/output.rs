//! Output bundle of an experiment: raw error samples, sync schedules,
//! summary tables and metadata. Formats are described in `docs/formats.md`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::sim::{LoadMetrics, MonteCarloResult, RunReport, ScenarioConfig};
use crate::stats::Summary;

pub const RAW_ERRORS: &str = "raw_errors.csv";
pub const SYNC_SCHEDULES: &str = "sync_schedules.csv";
pub const SUMMARY_JSON: &str = "summary.json";
pub const SUMMARY_TXT: &str = "summary.txt";
pub const METADATA: &str = "metadata.json";
pub const CONFIG: &str = "config.toml";

pub const RAW_HEADER: &str = "strategy,seed,time,track_id,target_id,position_error";
pub const SYNC_HEADER: &str = "strategy,seed,sync_time";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategyRow {
    pub strategy: String,
    pub runs: usize,
    pub samples: usize,
    pub stats: Option<Summary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub strategy: String,
    pub seed: u64,
    pub samples: usize,
    pub stats: Option<Summary>,
    pub sync_count: usize,
    pub tracks_confirmed: usize,
    pub targets_acquired: usize,
    pub load: LoadMetrics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryDoc {
    pub strategies: Vec<StrategyRow>,
    pub runs: Vec<RunRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub artifact_version: String,
    pub config_sha256: String,
    pub seeds: Vec<u64>,
    pub strategies: Vec<String>,
    pub error_sampling: String,
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::InvalidArgument(format!("{}: {e}", path.display()))
}

pub fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

pub fn raw_errors_csv(reports: &[RunReport]) -> String {
    let mut out = String::from(RAW_HEADER);
    out.push('\n');
    for r in reports {
        for s in &r.error_samples {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.strategy, r.seed, s.time, s.track_id, s.target_id, s.position_error
            );
        }
    }
    out
}

pub fn sync_schedules_csv(reports: &[RunReport]) -> String {
    let mut out = String::from(SYNC_HEADER);
    out.push('\n');
    for r in reports {
        for t in &r.sync_times {
            let _ = writeln!(out, "{},{},{}", r.strategy, r.seed, t);
        }
    }
    out
}

pub fn summary_doc(result: &MonteCarloResult) -> SummaryDoc {
    SummaryDoc {
        strategies: result
            .table
            .iter()
            .map(|row| StrategyRow {
                strategy: row.strategy.clone(),
                runs: row.runs,
                samples: row.summary.map_or(0, |s| s.count),
                stats: row.summary,
            })
            .collect(),
        runs: result
            .reports
            .iter()
            .map(|r| RunRow {
                strategy: r.strategy.clone(),
                seed: r.seed,
                samples: r.error_samples.len(),
                stats: r.stats,
                sync_count: r.sync_times.len(),
                tracks_confirmed: r.tracks_confirmed,
                targets_acquired: r.targets_acquired,
                load: r.load.clone(),
            })
            .collect(),
    }
}

/// Fixed-width table with one row per strategy.
pub fn summary_table(doc: &SummaryDoc) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<14} {:>5} {:>8} {:>12} {:>12} {:>12} {:>12} {:>12}",
        "strategy", "runs", "samples", "median", "min", "max", "mean", "std"
    );
    for row in &doc.strategies {
        match row.stats {
            Some(s) => {
                let _ = writeln!(
                    out,
                    "{:<14} {:>5} {:>8} {:>12.1} {:>12.1} {:>12.1} {:>12.1} {:>12.1}",
                    row.strategy, row.runs, row.samples, s.median, s.min, s.max, s.mean, s.std
                );
            }
            None => {
                let _ = writeln!(out, "{:<14} {:>5} {:>8} {:>12}", row.strategy, row.runs, 0, "no samples");
            }
        }
    }
    out
}

/// Write the full bundle into `dir`, creating it if needed.
pub fn write_bundle(dir: &Path, config: &ScenarioConfig, result: &MonteCarloResult) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let config_text = config.to_toml()?;
    let doc = summary_doc(result);
    let mut seeds: Vec<u64> = result.reports.iter().map(|r| r.seed).collect();
    seeds.sort_unstable();
    seeds.dedup();
    let meta = Metadata {
        artifact_version: env!("CARGO_PKG_VERSION").to_string(),
        config_sha256: sha256_hex(&config_text),
        seeds,
        strategies: doc.strategies.iter().map(|r| r.strategy.clone()).collect(),
        error_sampling: serde_json::to_value(config.error_sampling)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default(),
    };
    let files = [
        (CONFIG, config_text.clone()),
        (RAW_ERRORS, raw_errors_csv(&result.reports)),
        (SYNC_SCHEDULES, sync_schedules_csv(&result.reports)),
        (SUMMARY_JSON, pretty_json(&doc)?),
        (SUMMARY_TXT, summary_table(&doc)),
        (METADATA, pretty_json(&meta)?),
    ];
    for (name, body) in files {
        let path = dir.join(name);
        fs::write(&path, body).map_err(|e| io_err(&path, e))?;
    }
    Ok(())
}

fn pretty_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// One parsed row of `raw_errors.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct RawRow {
    pub strategy: String,
    pub seed: u64,
    pub time: f64,
    pub track_id: u64,
    pub target_id: u64,
    pub position_error: f64,
}

pub fn parse_raw_errors(text: &str) -> Result<Vec<RawRow>> {
    let mut lines = text.lines();
    if lines.next() != Some(RAW_HEADER) {
        return Err(Error::InvalidArgument(format!("{RAW_ERRORS}: missing header")));
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, line)| {
            let bad = || Error::InvalidArgument(format!("{RAW_ERRORS}:{}: malformed row", i + 2));
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 6 {
                return Err(bad());
            }
            Ok(RawRow {
                strategy: f[0].to_string(),
                seed: f[1].parse().map_err(|_| bad())?,
                time: f[2].parse().map_err(|_| bad())?,
                track_id: f[3].parse().map_err(|_| bad())?,
                target_id: f[4].parse().map_err(|_| bad())?,
                position_error: f[5].parse().map_err(|_| bad())?,
            })
        })
        .collect()
}

/// Recompute every statistic of the bundle in `dir` from `raw_errors.csv`
/// and compare with the stored values. Returns the list of mismatches.
pub fn verify_bundle(dir: &Path) -> Result<Vec<String>> {
    let read = |name: &str| {
        let path = dir.join(name);
        fs::read_to_string(&path).map_err(|e| io_err(&path, e))
    };
    let rows = parse_raw_errors(&read(RAW_ERRORS)?)?;
    let doc: SummaryDoc =
        serde_json::from_str(&read(SUMMARY_JSON)?).map_err(|e| Error::InvalidArgument(format!("{SUMMARY_JSON}: {e}")))?;
    let meta: Metadata =
        serde_json::from_str(&read(METADATA)?).map_err(|e| Error::InvalidArgument(format!("{METADATA}: {e}")))?;
    let mut problems = Vec::new();

    let stats_of = |errors: Vec<f64>| -> Result<Option<Summary>> {
        if errors.is_empty() {
            Ok(None)
        } else {
            Summary::of(&errors).map(Some)
        }
    };
    for row in &doc.strategies {
        let errors: Vec<f64> = rows.iter().filter(|r| r.strategy == row.strategy).map(|r| r.position_error).collect();
        if errors.len() != row.samples {
            problems.push(format!("{}: {} samples stored, {} in raw file", row.strategy, row.samples, errors.len()));
        }
        let recomputed = stats_of(errors)?;
        if recomputed != row.stats {
            problems.push(format!("{}: pooled statistics differ from raw samples", row.strategy));
        }
    }
    for run in &doc.runs {
        let errors: Vec<f64> = rows
            .iter()
            .filter(|r| r.strategy == run.strategy && r.seed == run.seed)
            .map(|r| r.position_error)
            .collect();
        if stats_of(errors)? != run.stats {
            problems.push(format!("{} seed {}: run statistics differ from raw samples", run.strategy, run.seed));
        }
    }
    for r in &rows {
        if !doc.runs.iter().any(|run| run.strategy == r.strategy && run.seed == r.seed) {
            problems.push(format!("raw row for unknown run {} seed {}", r.strategy, r.seed));
            break;
        }
    }
    if let Ok(config_text) = read(CONFIG) {
        if sha256_hex(&config_text) != meta.config_sha256 {
            problems.push("config.toml does not match the stored hash".to_string());
        }
    } else {
        problems.push("config.toml missing".to_string());
    }
    Ok(problems)
}
