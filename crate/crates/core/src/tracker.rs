//! Converted-measurement Kalman tracking with a nearly-constant-velocity
//! motion model, plus track lifecycle and error bookkeeping.

use std::collections::VecDeque;

use nalgebra::{Matrix3, Matrix3x6, Matrix6, Matrix6x3, SymmetricEigen, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::radar::{direction, MonostaticMeasurement};

/// χ²(3) 99% quantile.
pub const GATE_CHI2_3DOF_99: f64 = 11.344_866_730_144_373;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackerParams {
    /// Continuous white-noise acceleration spectral density (m²/s³).
    pub process_noise: f64,
    pub confirm_hits: usize,
    pub confirm_window: usize,
    pub drop_after_misses: u32,
    pub gate_chi2: f64,
    /// Prior velocity standard deviation per axis for a new track (m/s).
    pub init_velocity_std: f64,
}

impl Default for TrackerParams {
    fn default() -> Self {
        Self {
            process_noise: 10.0,
            confirm_hits: 3,
            confirm_window: 4,
            drop_after_misses: 5,
            gate_chi2: GATE_CHI2_3DOF_99,
            init_velocity_std: 1000.0,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrackStatus {
    Tentative,
    Confirmed,
    Dropped,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum UpdateOutcome {
    Updated,
    Gated,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Track {
    pub track_id: u64,
    /// Position (m) and velocity (m/s).
    pub state: Vector6<f64>,
    pub covariance: Matrix6<f64>,
    pub last_update: f64,
    pub status: TrackStatus,
    pub hit_count: u32,
    /// Consecutive misses.
    pub miss_count: u32,
    history: VecDeque<bool>,
}

/// Debiased spherical → Cartesian conversion about the receiver.
///
/// The mean uses the multiplicative debiasing factors `exp(σ²/2)` of the
/// angle noise; the covariance is the first-order transform of the supplied
/// (R, az, el) covariance.
pub fn to_cartesian(m: &MonostaticMeasurement, rx: &Vector3<f64>) -> (Vector3<f64>, Matrix3<f64>) {
    let (r, az, el) = (m.range, m.azimuth, m.elevation);
    let lam_az = (-0.5 * m.covariance[(1, 1)].max(0.0)).exp();
    let lam_el = (-0.5 * m.covariance[(2, 2)].max(0.0)).exp();
    let (se, ce) = el.sin_cos();
    let (sa, ca) = az.sin_cos();
    let z = rx
        + Vector3::new(
            r * ce * sa / (lam_az * lam_el),
            r * ce * ca / (lam_az * lam_el),
            r * se / lam_el,
        );
    let jac = Matrix3::new(
        ce * sa, r * ce * ca, -r * se * sa, //
        ce * ca, -r * ce * sa, -r * se * ca, //
        se, 0.0, r * ce,
    );
    let cov = jac * m.covariance * jac.transpose();
    (z, (cov + cov.transpose()) * 0.5)
}

/// Cartesian covariance of a measurement with diagonal (R, az, el) noise at a
/// given position, used for planning.
pub fn cartesian_noise(position: &Vector3<f64>, rx: &Vector3<f64>, range_std: f64, az_std: f64, el_std: f64) -> Matrix3<f64> {
    let rel = position - rx;
    let r = rel.norm();
    let (az, el) = crate::radar::az_el(&rel);
    let m = MonostaticMeasurement {
        range: r,
        azimuth: az,
        elevation: el,
        covariance: Matrix3::from_diagonal(&Vector3::new(range_std.powi(2), az_std.powi(2), el_std.powi(2))),
        timestamp: 0.0,
    };
    to_cartesian(&m, rx).1
}

pub fn check_psd(c: &Matrix3<f64>) -> Result<()> {
    if c.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonPsdCovariance);
    }
    let asym = (c - c.transpose()).abs().max();
    let scale = c.trace().abs().max(f64::MIN_POSITIVE);
    if asym > 1e-9 * scale {
        return Err(Error::NonPsdCovariance);
    }
    let eig = SymmetricEigen::new((c + c.transpose()) * 0.5);
    if eig.eigenvalues.min() < -1e-12 * scale {
        return Err(Error::NonPsdCovariance);
    }
    Ok(())
}

fn transition(dt: f64) -> Matrix6<f64> {
    let mut f = Matrix6::identity();
    for i in 0..3 {
        f[(i, i + 3)] = dt;
    }
    f
}

fn process_noise(q: f64, dt: f64) -> Matrix6<f64> {
    let mut m = Matrix6::zeros();
    for i in 0..3 {
        m[(i, i)] = q * dt.powi(3) / 3.0;
        m[(i, i + 3)] = q * dt.powi(2) / 2.0;
        m[(i + 3, i)] = q * dt.powi(2) / 2.0;
        m[(i + 3, i + 3)] = q * dt;
    }
    m
}

fn observation() -> Matrix3x6<f64> {
    let mut h = Matrix3x6::zeros();
    for i in 0..3 {
        h[(i, i)] = 1.0;
    }
    h
}

/// Covariance after a constant-velocity prediction over `dt`.
pub fn predict_covariance(p: &Matrix6<f64>, q: f64, dt: f64) -> Matrix6<f64> {
    let f = transition(dt);
    let out = f * p * f.transpose() + process_noise(q, dt);
    (out + out.transpose()) * 0.5
}

/// Covariance after a Kalman update with measurement noise `r` (Joseph form).
pub fn updated_covariance(p: &Matrix6<f64>, r: &Matrix3<f64>) -> Option<Matrix6<f64>> {
    let h = observation();
    let s = h * p * h.transpose() + r;
    let s_inv = s.try_inverse()?;
    let k: Matrix6x3<f64> = p * h.transpose() * s_inv;
    let ikh = Matrix6::identity() - k * h;
    let out = ikh * p * ikh.transpose() + k * r * k.transpose();
    Some((out + out.transpose()) * 0.5)
}

impl Track {
    /// Tentative track from a first measurement; velocity unknown.
    pub fn initiate(track_id: u64, m: &MonostaticMeasurement, rx: &Vector3<f64>, params: &TrackerParams) -> Result<Self> {
        check_psd(&m.covariance)?;
        let (z, r) = to_cartesian(m, rx);
        let mut state = Vector6::zeros();
        state.fixed_rows_mut::<3>(0).copy_from(&z);
        let mut covariance = Matrix6::zeros();
        covariance.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
        for i in 3..6 {
            covariance[(i, i)] = params.init_velocity_std.powi(2);
        }
        let mut history = VecDeque::with_capacity(params.confirm_window);
        history.push_back(true);
        Ok(Self {
            track_id,
            state,
            covariance,
            last_update: m.timestamp,
            status: TrackStatus::Tentative,
            hit_count: 1,
            miss_count: 0,
            history,
        })
    }

    pub fn position(&self) -> Vector3<f64> {
        self.state.fixed_rows::<3>(0).into_owned()
    }

    pub fn velocity(&self) -> Vector3<f64> {
        self.state.fixed_rows::<3>(3).into_owned()
    }

    pub fn position_at(&self, time: f64) -> Vector3<f64> {
        self.position() + self.velocity() * (time - self.last_update)
    }

    pub fn is_alive(&self) -> bool {
        self.status != TrackStatus::Dropped
    }

    /// Hits among the most recent `confirm_window` dwell outcomes.
    pub fn recent_hits(&self) -> usize {
        self.history.iter().filter(|&&h| h).count()
    }

    /// Constant-velocity prediction to `to_time`.
    pub fn predict(&self, to_time: f64, process_noise_q: f64) -> Result<Track> {
        let dt = to_time - self.last_update;
        if dt < 0.0 || !dt.is_finite() {
            return Err(Error::TimeReversal {
                current: self.last_update,
                requested: to_time,
            });
        }
        let mut out = self.clone();
        if dt > 0.0 {
            out.state = transition(dt) * self.state;
            out.covariance = predict_covariance(&self.covariance, process_noise_q, dt);
            out.last_update = to_time;
        }
        Ok(out)
    }

    /// Normalised innovation squared of a measurement against the track
    /// predicted to the measurement time.
    pub fn innovation_distance(&self, m: &MonostaticMeasurement, rx: &Vector3<f64>, q: f64) -> Result<f64> {
        check_psd(&m.covariance)?;
        let pred = self.predict(m.timestamp, q)?;
        let (z, r) = to_cartesian(m, rx);
        let h = observation();
        let nu = z - h * pred.state;
        let s = h * pred.covariance * h.transpose() + r;
        let s_inv = s.try_inverse().ok_or(Error::NonPsdCovariance)?;
        Ok((nu.transpose() * s_inv * nu)[(0, 0)])
    }

    /// Predict to the measurement time and update, unless the measurement
    /// falls outside the χ² gate, in which case the track is returned
    /// unchanged apart from the registered miss.
    pub fn update(&self, m: &MonostaticMeasurement, rx: &Vector3<f64>, params: &TrackerParams) -> Result<(Track, UpdateOutcome)> {
        check_psd(&m.covariance)?;
        let pred = self.predict(m.timestamp, params.process_noise)?;
        let (z, r) = to_cartesian(m, rx);
        let h = observation();
        let nu = z - h * pred.state;
        let s = h * pred.covariance * h.transpose() + r;
        let s_inv = s.try_inverse().ok_or(Error::NonPsdCovariance)?;
        let d2 = (nu.transpose() * s_inv * nu)[(0, 0)];
        if d2 > params.gate_chi2 {
            let mut out = self.clone();
            out.register_miss(params);
            return Ok((out, UpdateOutcome::Gated));
        }
        let k: Matrix6x3<f64> = pred.covariance * h.transpose() * s_inv;
        let mut out = pred;
        out.state += k * nu;
        let ikh = Matrix6::identity() - k * h;
        let p = ikh * out.covariance * ikh.transpose() + k * r * k.transpose();
        out.covariance = (p + p.transpose()) * 0.5;
        out.register_hit(params);
        Ok((out, UpdateOutcome::Updated))
    }

    fn push_outcome(&mut self, hit: bool, window: usize) {
        self.history.push_back(hit);
        while self.history.len() > window.max(1) {
            self.history.pop_front();
        }
    }

    pub fn register_hit(&mut self, params: &TrackerParams) {
        self.hit_count += 1;
        self.miss_count = 0;
        self.push_outcome(true, params.confirm_window);
        if self.status == TrackStatus::Tentative && self.recent_hits() >= params.confirm_hits {
            self.status = TrackStatus::Confirmed;
        }
    }

    /// A dwell on this track produced no usable measurement.
    pub fn register_miss(&mut self, params: &TrackerParams) {
        self.miss_count += 1;
        self.push_outcome(false, params.confirm_window);
        if self.miss_count >= params.drop_after_misses {
            self.status = TrackStatus::Dropped;
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackErrorSample {
    pub time: f64,
    pub track_id: u64,
    pub target_id: u64,
    pub position_error: f64,
}

/// One error sample per confirmed track, associated to the nearest true
/// target position at `time`.
pub fn record_errors(tracks: &[Track], truth: &[(u64, Vector3<f64>)], time: f64) -> Vec<TrackErrorSample> {
    let mut out = Vec::new();
    for track in tracks.iter().filter(|t| t.status == TrackStatus::Confirmed) {
        let est = track.position_at(time);
        let nearest = truth
            .iter()
            .map(|(id, p)| (*id, (p - est).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        if let Some((target_id, position_error)) = nearest {
            out.push(TrackErrorSample {
                time,
                track_id: track.track_id,
                target_id,
                position_error,
            });
        }
    }
    out
}

/// Monostatic measurement of a position as seen from the receiver.
pub fn measurement_of(position: &Vector3<f64>, rx: &Vector3<f64>, covariance: Matrix3<f64>, timestamp: f64) -> MonostaticMeasurement {
    let rel = position - rx;
    let (az, el) = crate::radar::az_el(&rel);
    debug_assert!((direction(az, el) * rel.norm() - rel).norm() <= 1e-6 * rel.norm().max(1.0));
    MonostaticMeasurement {
        range: rel.norm(),
        azimuth: az,
        elevation: el,
        covariance,
        timestamp,
    }
}
