//! Acceptance criteria 1-9, one PASS/FAIL line each. Exits non-zero on any
//! failure outside `KNOWN_FAILURES`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qram_sync::clock::ClockState;
use qram_sync::qram::{build_job_list, greedy_allocate, JobList, ResourceVector, TaskConfig, TaskId};
use qram_sync::radar::{
    az_el, linear_to_db, mc_covariance, receiver_range, snr, sum_range, BistaticMeasurement, NoiseStds,
    Pointing, RadarParams, ReceivePath, CALIBRATION_RANGE_M,
};
use qram_sync::sim::{monte_carlo, standard_strategies, ScenarioConfig, StrategySpec};
use qram_sync::stats::sample_variance;

/// Criteria that fail on the specified algorithm. They still print FAIL; a
/// PASS here is reported so the list can be pruned.
const KNOWN_FAILURES: &[usize] = &[1];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn v(x: f64, y: f64, z: f64) -> Vector3<f64> {
    Vector3::new(x, y, z)
}

// ---------------------------------------------------------------- 1

fn scalar_list(task: u64, pts: &[(f64, f64)]) -> JobList {
    let configs = pts
        .iter()
        .map(|&(r, u)| TaskConfig::new(TaskId(task), ResourceVector::scalar(r).unwrap(), u, &[1.0]).unwrap())
        .collect();
    build_job_list(TaskId(task), configs).unwrap()
}

/// Exhaustive optimum over the raw configurations, each task optionally idle.
fn brute_force(tasks: &[Vec<(f64, f64)>], budget: f64) -> f64 {
    fn go(tasks: &[Vec<(f64, f64)>], i: usize, left: f64, acc: f64, best: &mut f64) {
        if i == tasks.len() {
            *best = best.max(acc);
            return;
        }
        go(tasks, i + 1, left, acc, best);
        for &(r, u) in &tasks[i] {
            if r <= left {
                go(tasks, i + 1, left - r, acc + u, best);
            }
        }
    }
    let mut best = 0.0;
    go(tasks, 0, budget, 0.0, &mut best);
    best
}

fn greedy_utility(tasks: &[Vec<(f64, f64)>], budget: f64) -> f64 {
    let lists: Vec<JobList> = tasks.iter().enumerate().map(|(i, p)| scalar_list(i as u64, p)).collect();
    greedy_allocate(&lists, &ResourceVector::scalar(budget).unwrap()).unwrap().total_utility
}

/// Concave list: random resource steps, non-increasing marginal ratios.
fn concave_task(rng: &mut ChaCha8Rng, max_entries: usize) -> Vec<(f64, f64)> {
    let n = rng.random_range(1..=max_entries);
    let mut ratios: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..2.0)).collect();
    ratios.sort_by(|a, b| b.total_cmp(a));
    let (mut r, mut u) = (0.0, 0.0);
    ratios
        .iter()
        .map(|k| {
            let dr = rng.random_range(0.05..0.5);
            r += dr;
            u += k * dr;
            (r, u)
        })
        .collect()
}

fn arbitrary_task(rng: &mut ChaCha8Rng, max_entries: usize) -> Vec<(f64, f64)> {
    (0..rng.random_range(1..=max_entries))
        .map(|_| (rng.random_range(0.05..1.0), rng.random_range(0.0..1.0)))
        .collect()
}

/// Fraction of instances where greedy reaches 95% of the optimum.
fn near_optimal_fraction(rng: &mut ChaCha8Rng, instances: usize, task: fn(&mut ChaCha8Rng, usize) -> Vec<(f64, f64)>) -> f64 {
    let mut good = 0;
    for _ in 0..instances {
        let n_tasks = rng.random_range(1..=4);
        let tasks: Vec<Vec<(f64, f64)>> = (0..n_tasks).map(|_| task(rng, 6)).collect();
        let total: f64 = tasks.iter().map(|t| t.iter().map(|c| c.0).fold(0.0, f64::max)).sum();
        let budget = total * rng.random_range(0.2..0.8);
        if greedy_utility(&tasks, budget) >= 0.95 * brute_force(&tasks, budget) - 1e-12 {
            good += 1;
        }
    }
    good as f64 / instances as f64
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let instances = 1000;
    let frac = near_optimal_fraction(&mut rng, instances, concave_task);
    // Reported only: lists without any concavity.
    let arbitrary = near_optimal_fraction(&mut rng, instances, arbitrary_task);

    // Unit resource steps with non-increasing marginal utilities.
    let mut exact = 0;
    for _ in 0..instances {
        let n_tasks = rng.random_range(1..=4);
        let tasks: Vec<Vec<(f64, f64)>> = (0..n_tasks)
            .map(|_| {
                let mut gains: Vec<f64> = (0..rng.random_range(1..=6)).map(|_| rng.random_range(0.01..1.0)).collect();
                gains.sort_by(|a, b| b.total_cmp(a));
                let mut u = 0.0;
                gains
                    .iter()
                    .enumerate()
                    .map(|(k, g)| {
                        u += g;
                        ((k + 1) as f64, u)
                    })
                    .collect()
            })
            .collect();
        let budget = rng.random_range(0..=4 * n_tasks) as f64;
        let opt = brute_force(&tasks, budget);
        if (greedy_utility(&tasks, budget) - opt).abs() <= 1e-9 * opt.max(1.0) {
            exact += 1;
        }
    }
    outcome(
        frac >= 0.95 && exact == instances,
        format!(
            "greedy >= 95% of optimum on {:.1}% of concave-list instances ({:.1}% on arbitrary lists); unit-step exact {exact}/{instances}",
            100.0 * frac,
            100.0 * arbitrary
        ),
    )
}

// ---------------------------------------------------------------- 2

fn criterion_2() -> Outcome {
    let (d, n, walks) = (1e-6, 100.0, 10_000u64);
    let finals: Vec<f64> = (0..walks)
        .map(|seed| {
            let mut c = ClockState::new(d, seed, 0.0).unwrap();
            c.advance(n).unwrap();
            c.current_offset()
        })
        .collect();
    let mean = finals.iter().sum::<f64>() / walks as f64;
    let var = finals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / walks as f64;
    let expect = n * d * d / 3.0;
    let rel = (var - expect).abs() / expect;
    outcome(rel <= 0.05, format!("Var(dT) = {var:.4e}, N d^2/3 = {expect:.4e}, rel err {:.2}%", 100.0 * rel))
}

// ---------------------------------------------------------------- 3

fn criterion_3() -> Outcome {
    let p = RadarParams::default();
    let origin = Vector3::zeros();
    let s = |target: Vector3<f64>, rcs: f64, pulses: u32, tx: Vector3<f64>, rx: Vector3<f64>| {
        snr(&p, &target, rcs, pulses, &tx, &rx, Pointing::Centred, ReceivePath::Monostatic).unwrap()
    };
    let base = s(v(0.0, CALIBRATION_RANGE_M, 0.0), 1.0, 32, origin, origin);
    let db = linear_to_db(base);
    let target = v(0.0, 150e3, 0.0);
    let ref_snr = s(target, 1.0, 32, v(0.0, 0.0, 0.0), v(0.0, 50e3, 0.0));
    let ratios = [
        s(target, 1.0, 64, origin, v(0.0, 50e3, 0.0)) / ref_snr - 2.0,
        s(target, 3.0, 32, origin, v(0.0, 50e3, 0.0)) / ref_snr - 3.0,
        // tx leg 150 km -> 300 km
        s(target, 1.0, 32, v(0.0, -150e3, 0.0), v(0.0, 50e3, 0.0)) / ref_snr - 0.25,
        // rx leg 100 km -> 200 km
        s(target, 1.0, 32, origin, v(0.0, 350e3, 0.0)) / ref_snr - 0.25,
    ];
    let worst = ratios.iter().map(|r| r.abs()).fold(0.0, f64::max);
    outcome(
        (db - 10.0).abs() <= 0.1 && worst <= 1e-12,
        format!("{db:.4} dB at 300 km; worst scaling-ratio deviation {worst:.1e}"),
    )
}

// ---------------------------------------------------------------- 4

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    let mut done = 0;
    while done < 1000 {
        let tx = v(rng.random_range(-50e3..50e3), rng.random_range(-50e3..50e3), rng.random_range(0.0..1e3));
        let rx = v(rng.random_range(-50e3..50e3), rng.random_range(-50e3..50e3), rng.random_range(0.0..1e3));
        let t = v(rng.random_range(-300e3..300e3), rng.random_range(-300e3..300e3), rng.random_range(0.0..20e3));
        let to_t = t - rx;
        let base = tx - rx;
        // Non-degenerate: target well away from the baseline line.
        let sin_psi = to_t.cross(&base).norm() / (to_t.norm() * base.norm());
        if sin_psi < 0.05 || to_t.norm() < 1e3 {
            continue;
        }
        let (az, el) = az_el(&to_t);
        let r = receiver_range(sum_range(&t, &tx, &rx), az, el, &tx, &rx).unwrap();
        worst = worst.max((r - to_t.norm()).abs() / to_t.norm());
        done += 1;
    }
    let d = 123_456.789;
    let colocated = receiver_range(d, 0.3, 0.05, &v(1.0, 2.0, 3.0), &v(1.0, 2.0, 3.0)).unwrap();
    outcome(
        worst <= 1e-6 && colocated == d / 2.0,
        format!("worst relative error {worst:.2e} over 1000 geometries; colocated R = D/2: {}", colocated == d / 2.0),
    )
}

// ---------------------------------------------------------------- 5

fn spd(c: &Matrix3<f64>) -> bool {
    c.cholesky().is_some() && (c - c.transpose()).abs().max() == 0.0
}

fn criterion_5() -> Outcome {
    let noise = NoiseStds {
        sum_range: 60.0,
        azimuth: 2e-3,
        elevation: 3e-3,
    };
    let m = BistaticMeasurement {
        sum_range: 200e3,
        azimuth: 0.4,
        elevation: 0.05,
        snr: 100.0,
        timestamp: 0.0,
    };
    let site = v(0.0, 0.0, 0.0);
    let c = mc_covariance(&m, &noise, &site, &site, 100_000, 5).unwrap();
    let analytic = [
        (noise.sum_range / 2.0).powi(2),
        noise.azimuth.powi(2),
        noise.elevation.powi(2),
    ];
    let worst = (0..3).map(|i| (c[(i, i)] - analytic[i]).abs() / analytic[i]).fold(0.0, f64::max);
    let repeat = mc_covariance(&m, &noise, &site, &site, 100_000, 5).unwrap() == c;

    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let tx = v(-10e3, 0.0, 0.0);
    let rx = v(10e3, 0.0, 0.0);
    let mut all_spd = spd(&c);
    for seed in 0..200 {
        let t = v(rng.random_range(-150e3..150e3), rng.random_range(30e3..300e3), rng.random_range(0.0..15e3));
        let (az, el) = az_el(&(t - rx));
        let m = BistaticMeasurement {
            sum_range: sum_range(&t, &tx, &rx),
            azimuth: az,
            elevation: el,
            snr: 100.0,
            timestamp: 0.0,
        };
        all_spd &= spd(&mc_covariance(&m, &noise, &tx, &rx, 500, seed).unwrap());
    }
    outcome(
        worst <= 0.10 && repeat && all_spd,
        format!("worst variance deviation {:.2}%; SPD on all draws: {all_spd}; bit-exact repeat: {repeat}", 100.0 * worst),
    )
}

// ---------------------------------------------------------------- 6-8

fn criteria_6_to_8() -> (Outcome, Outcome, Outcome) {
    let cfg = ScenarioConfig::default();
    let seeds: Vec<u64> = (1..=20).collect();
    let start = Instant::now();
    let result = monte_carlo(&cfg, &standard_strategies(), &seeds).unwrap();
    let elapsed = start.elapsed();

    let stat = |name: &str| {
        result
            .table
            .iter()
            .find(|r| r.strategy == name)
            .and_then(|r| r.summary)
            .expect("every strategy produces samples")
    };
    let case = stat("caseDecision");
    let regs: BTreeMap<String, _> = result
        .table
        .iter()
        .filter(|r| r.strategy.starts_with("regUpdate"))
        .map(|r| (r.strategy.clone(), r.summary.unwrap()))
        .collect();
    let best_reg = regs.values().map(|s| s.mean).fold(f64::INFINITY, f64::min);
    let lowest_reg_std = regs.values().map(|s| s.std).fold(f64::INFINITY, f64::min);
    let tb = stat("TBreg3");
    let c6 = case.mean <= best_reg && best_reg <= tb.mean && case.std < lowest_reg_std && elapsed < Duration::from_secs(600);
    let table: Vec<String> = result
        .table
        .iter()
        .map(|r| {
            let s = r.summary.as_ref().unwrap();
            format!("{} {:.1}/{:.1}", r.strategy, s.mean, s.std)
        })
        .collect();
    let o6 = outcome(c6, format!("mean/std: {} ({:.1} s)", table.join(", "), elapsed.as_secs_f64()));

    let mut min_var = f64::INFINITY;
    for r in result.reports.iter().filter(|r| r.strategy == "caseDecision") {
        let gaps: Vec<f64> = r.sync_times.windows(2).map(|w| w[1] - w[0]).collect();
        min_var = min_var.min(sample_variance(&gaps).unwrap_or(0.0));
    }
    let mut perfect = cfg.clone();
    perfect.clock.step_bound = 0.0;
    let d0 = monte_carlo(&perfect, &[StrategySpec::CaseDecision], &seeds).unwrap();
    let post_initial: usize = d0.reports.iter().map(|r| r.sync_times.iter().filter(|&&t| t > 0.0).count()).sum();
    let o7 = outcome(
        min_var > 0.0 && post_initial == 0,
        format!("smallest per-run interval variance {min_var:.3} s^2; post-initial syncs with d=0: {post_initial}"),
    );

    let violations: u64 = result.reports.iter().map(|r| r.load.budget_violations as u64).sum();
    let periods: u64 = result.reports.iter().map(|r| r.load.periods as u64).sum();
    let o8 = outcome(violations == 0, format!("{violations} violations over {periods} planning periods"));
    (o6, o7, o8)
}

// ---------------------------------------------------------------- 9

fn criterion_9() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("scenario.toml");
    let cfg = ScenarioConfig {
        duration: 20.0,
        ..ScenarioConfig::default()
    };
    fs::write(&cfg_path, cfg.to_toml().unwrap()).unwrap();
    let run = |out: &Path| {
        let status = Command::new(env!("CARGO_BIN_EXE_qram-sync"))
            .arg("run")
            .arg(&cfg_path)
            .args(["--seed", "7", "--out-dir"])
            .arg(out)
            .output()
            .unwrap()
            .status;
        assert!(status.success());
    };
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run(&a);
    run(&b);
    let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    let differing: Vec<String> = names
        .iter()
        .filter(|n| fs::read(a.join(n)).unwrap() != fs::read(b.join(n)).ok().unwrap_or_default())
        .map(|n| n.to_string_lossy().into_owned())
        .collect();
    outcome(
        differing.is_empty() && !names.is_empty(),
        format!("{} files compared, differing: {differing:?}", names.len()),
    )
}

fn timed(limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let mut o = f();
    let t = start.elapsed();
    if let Some(limit) = limit {
        o.pass &= t < limit;
        o.detail = format!("{} ({:.2} s, limit {} s)", o.detail, t.as_secs_f64(), limit.as_secs());
    }
    o
}

fn main() {
    let mut results = vec![
        (1, timed(Some(Duration::from_secs(10)), criterion_1)),
        (2, timed(Some(Duration::from_secs(5)), criterion_2)),
        (3, timed(None, criterion_3)),
        (4, timed(None, criterion_4)),
        (5, timed(None, criterion_5)),
    ];
    let (o6, o7, o8) = criteria_6_to_8();
    results.extend([(6, o6), (7, o7), (8, o8), (9, timed(None, criterion_9))]);
    let mut failed = 0;
    for (n, o) in &results {
        let known = KNOWN_FAILURES.contains(n);
        let verdict = match (o.pass, known) {
            (true, false) => "PASS",
            (true, true) => "PASS (listed as known failure)",
            (false, true) => "FAIL (known)",
            (false, false) => "FAIL",
        };
        println!("criterion {n}: {verdict}: {}", o.detail);
        failed += usize::from(!o.pass && !known);
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
