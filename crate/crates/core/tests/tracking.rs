use nalgebra::{Matrix3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use qram_sync::radar::{detect, mc_covariance, receiver_range, MonostaticMeasurement, NoiseStds, RadarParams};
use qram_sync::tracker::{measurement_of, Track, TrackerParams, UpdateOutcome};

const TX: Vector3<f64> = Vector3::new(-10e3, 0.0, 0.0);
const RX: Vector3<f64> = Vector3::new(10e3, 0.0, 0.0);

fn truth(t: f64) -> Vector3<f64> {
    Vector3::new(30e3, 150e3, 6e3) + Vector3::new(-150.0, -1000.0, 0.0) * t
}

#[test]
fn noiseless_updates_converge_below_a_metre() {
    let params = TrackerParams::default();
    let cov = Matrix3::from_diagonal(&Vector3::new(1e-6, 1e-16, 1e-16));
    let mut track = Track::initiate(1, &measurement_of(&truth(0.0), &RX, cov, 0.0), &RX, &params).unwrap();
    for k in 1..=10 {
        let t = 0.25 * k as f64;
        let (next, outcome) = track.update(&measurement_of(&truth(t), &RX, cov, t), &RX, &params).unwrap();
        assert_eq!(outcome, UpdateOutcome::Updated);
        track = next;
    }
    assert!((track.position() - truth(2.5)).norm() < 1.0);
}

/// Mean position error over a run fed through the passive-receiver chain
/// with a constant clock offset.
fn mean_error(clock_offset: f64) -> f64 {
    let radar = RadarParams::default();
    let params = TrackerParams::default();
    let noise = NoiseStds::for_snr(&radar, 200.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let measure = |t: f64, rng: &mut ChaCha8Rng, seed: u64| -> MonostaticMeasurement {
        let m = detect(&radar, 200.0, &truth(t), &TX, &RX, &noise, clock_offset, t, rng).unwrap();
        MonostaticMeasurement {
            range: receiver_range(m.sum_range, m.azimuth, m.elevation, &TX, &RX).unwrap(),
            azimuth: m.azimuth,
            elevation: m.elevation,
            covariance: mc_covariance(&m, &noise, &TX, &RX, 500, seed).unwrap(),
            timestamp: t,
        }
    };
    let mut track = Track::initiate(1, &measure(0.0, &mut rng, 0), &RX, &params).unwrap();
    let mut total = 0.0;
    let n = 40;
    for k in 1..=n {
        let t = 0.5 * k as f64;
        track = track.update(&measure(t, &mut rng, k), &RX, &params).unwrap().0;
        total += (track.position_at(t) - truth(t)).norm();
    }
    total / n as f64
}

#[test]
fn clock_bias_increases_tracking_error() {
    let clean = mean_error(0.0);
    let biased = mean_error(1e-6);
    assert!(biased > clean, "biased {biased} clean {clean}");
}
