//! Radar measurement models: bistatic radar equation, angular accuracy,
//! bistatic sum-range to receiver-range conversion, Monte Carlo covariance
//! conversion and the threshold detector.
//!
//! Frame: x east, y north, z up (metres). Azimuth is measured from north
//! towards east, elevation from the horizontal plane.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::clock::range_error_from_clock;
use crate::error::{Error, Result};

/// Boltzmann constant (J/K).
pub const BOLTZMANN: f64 = 1.380_649e-23;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Unit line-of-sight vector for an azimuth/elevation pair.
pub fn direction(azimuth: f64, elevation: f64) -> Vector3<f64> {
    Vector3::new(
        elevation.cos() * azimuth.sin(),
        elevation.cos() * azimuth.cos(),
        elevation.sin(),
    )
}

/// Azimuth and elevation of a vector.
pub fn az_el(v: &Vector3<f64>) -> (f64, f64) {
    (v.x.atan2(v.y), v.z.atan2((v.x * v.x + v.y * v.y).sqrt()))
}

pub fn wrap_angle(a: f64) -> f64 {
    (a + PI).rem_euclid(2.0 * PI) - PI
}

/// Cosine-tapered pencil beam: one-way power gain `cos²(πx / 2θ)` per axis,
/// which is -3 dB at `x = θ/2` and reaches the floor at the first null.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BeamPattern {
    pub beamwidth_az_deg: f64,
    pub beamwidth_el_deg: f64,
    pub sidelobe_floor_db: f64,
}

impl Default for BeamPattern {
    fn default() -> Self {
        Self {
            beamwidth_az_deg: 2.0,
            beamwidth_el_deg: 2.0,
            sidelobe_floor_db: -30.0,
        }
    }
}

impl BeamPattern {
    fn axis(offset: f64, beamwidth: f64, floor: f64) -> f64 {
        let x = PI * offset.abs() / (2.0 * beamwidth);
        if x >= FRAC_PI_2 {
            floor
        } else {
            x.cos().powi(2).max(floor)
        }
    }

    /// Relative power gain for a pointing offset (radians) in each axis.
    pub fn gain(&self, offset_az: f64, offset_el: f64) -> f64 {
        let floor = db_to_linear(self.sidelobe_floor_db);
        Self::axis(offset_az, self.beamwidth_az_deg.to_radians(), floor)
            * Self::axis(offset_el, self.beamwidth_el_deg.to_radians(), floor)
    }
}

/// Which receiver evaluates the radar equation.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum ReceivePath {
    /// The transmitter listening to its own waveform.
    Monostatic,
    /// The passive receiver; pays the communication-waveform mismatch loss.
    Passive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RadarParams {
    pub peak_power_w: f64,
    pub compression_ratio: f64,
    pub gain_tx: f64,
    pub gain_rx: f64,
    pub wavelength_m: f64,
    /// Linear system losses (<= 1).
    pub losses: f64,
    pub noise_factor: f64,
    /// kTB (W).
    pub thermal_noise_w: f64,
    /// Extra loss at the passive receiver from the filter mismatch (dB).
    pub comm_mismatch_loss_db: f64,
    pub max_range_m: f64,
    pub tx_pattern: BeamPattern,
    pub rx_beamwidth_az_deg: f64,
    pub rx_beamwidth_el_deg: f64,
    pub pri_s: f64,
    pub search_pulses: u32,
    pub detection_threshold_db: f64,
    /// Fixed standard deviation of the sum-range measurement (m).
    pub range_std_m: f64,
}

/// Calibration anchor: SNR of a 1 m² target at 300 km in the centre of a
/// search beam.
pub const CALIBRATION_RANGE_M: f64 = 300_000.0;
pub const CALIBRATION_SNR_DB: f64 = 10.0;

impl Default for RadarParams {
    fn default() -> Self {
        let mut p = Self {
            peak_power_w: 1.0,
            compression_ratio: 100.0,
            gain_tx: db_to_linear(40.0),
            gain_rx: db_to_linear(40.0),
            wavelength_m: 0.1,
            losses: db_to_linear(-5.0),
            noise_factor: db_to_linear(5.0),
            thermal_noise_w: BOLTZMANN * 290.0 * 1.0e6,
            comm_mismatch_loss_db: 3.0,
            max_range_m: 350_000.0,
            tx_pattern: BeamPattern::default(),
            rx_beamwidth_az_deg: 2.0,
            rx_beamwidth_el_deg: 2.0,
            // 120 fence positions of 32 pulses fill the 10 s unloaded update.
            pri_s: 10.0 / 120.0 / 32.0,
            search_pulses: 32,
            detection_threshold_db: 13.0,
            range_std_m: 50.0,
        };
        p.peak_power_w = p.calibrated_peak_power();
        p
    }
}

impl RadarParams {
    /// Peak power that puts the calibration anchor exactly at its SNR; the
    /// other factors of the radar equation are only observable through this
    /// product.
    pub fn calibrated_peak_power(&self) -> f64 {
        let r2 = CALIBRATION_RANGE_M * CALIBRATION_RANGE_M;
        db_to_linear(CALIBRATION_SNR_DB) * (4.0 * PI).powi(3) * r2 * r2 * self.thermal_noise_w * self.noise_factor
            / (self.search_pulses as f64
                * self.compression_ratio
                * self.gain_tx
                * self.gain_rx
                * self.wavelength_m.powi(2)
                * self.losses)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("peak_power_w", self.peak_power_w),
            ("compression_ratio", self.compression_ratio),
            ("gain_tx", self.gain_tx),
            ("gain_rx", self.gain_rx),
            ("wavelength_m", self.wavelength_m),
            ("losses", self.losses),
            ("noise_factor", self.noise_factor),
            ("thermal_noise_w", self.thermal_noise_w),
            ("max_range_m", self.max_range_m),
            ("pri_s", self.pri_s),
            ("rx_beamwidth_az_deg", self.rx_beamwidth_az_deg),
            ("rx_beamwidth_el_deg", self.rx_beamwidth_el_deg),
            ("tx_pattern.beamwidth_az_deg", self.tx_pattern.beamwidth_az_deg),
            ("tx_pattern.beamwidth_el_deg", self.tx_pattern.beamwidth_el_deg),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!("radar.{name} must be > 0, got {v}")));
            }
        }
        if self.losses > 1.0 {
            return Err(Error::InvalidConfig("radar.losses must be <= 1".into()));
        }
        if self.search_pulses == 0 {
            return Err(Error::InvalidConfig("radar.search_pulses must be > 0".into()));
        }
        if !(self.range_std_m >= 0.0) {
            return Err(Error::InvalidConfig("radar.range_std_m must be >= 0".into()));
        }
        Ok(())
    }

    pub fn dwell_duration(&self, pulses: u32) -> f64 {
        pulses as f64 * self.pri_s
    }

    pub fn detection_threshold(&self) -> f64 {
        db_to_linear(self.detection_threshold_db)
    }
}

/// Pointing offset of the transmit beam relative to the target direction.
#[derive(Copy, Clone, Debug, PartialEq)]
pub enum Pointing {
    Centred,
    /// Beam pointed at this azimuth/elevation as seen from the transmitter.
    Beam { azimuth: f64, elevation: f64 },
}

/// Signal-to-noise ratio from the bistatic radar equation.
#[allow(clippy::too_many_arguments)]
pub fn snr(
    params: &RadarParams,
    target: &Vector3<f64>,
    rcs: f64,
    pulses: u32,
    tx: &Vector3<f64>,
    rx: &Vector3<f64>,
    pointing: Pointing,
    path: ReceivePath,
) -> Result<f64> {
    let r_tx = (target - tx).norm();
    let r_rx = (target - rx).norm();
    if r_tx == 0.0 || r_rx == 0.0 {
        return Err(Error::ZeroRange);
    }
    let pattern = match pointing {
        Pointing::Centred => 1.0,
        Pointing::Beam { azimuth, elevation } => {
            let (az, el) = az_el(&(target - tx));
            params.tx_pattern.gain(wrap_angle(az - azimuth), el - elevation)
        }
    };
    let losses = match path {
        ReceivePath::Monostatic => params.losses,
        ReceivePath::Passive => params.losses * db_to_linear(-params.comm_mismatch_loss_db),
    };
    let num = params.peak_power_w
        * pulses as f64
        * params.compression_ratio
        * params.gain_tx
        * pattern
        * params.gain_rx
        * rcs
        * params.wavelength_m.powi(2)
        * losses;
    let den = (4.0 * PI).powi(3) * r_tx * r_tx * r_rx * r_rx * params.thermal_noise_w * params.noise_factor;
    Ok(num / den)
}

/// Angular standard deviation `0.628 θ / (2 sqrt(SNR))`.
pub fn angle_std(snr: f64, beamwidth_3db: f64) -> Result<f64> {
    if !(snr > 0.0) {
        return Err(Error::NonPositiveSnr(snr));
    }
    Ok(0.628 * beamwidth_3db / (2.0 * snr.sqrt()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BistaticMeasurement {
    /// Transmitter → target → receiver path length (m).
    pub sum_range: f64,
    pub azimuth: f64,
    pub elevation: f64,
    pub snr: f64,
    pub timestamp: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MonostaticMeasurement {
    /// Receiver → target range (m).
    pub range: f64,
    pub azimuth: f64,
    pub elevation: f64,
    /// Covariance in (range, azimuth, elevation).
    pub covariance: Matrix3<f64>,
    pub timestamp: f64,
}

/// Noise-free sum range of a target.
pub fn sum_range(target: &Vector3<f64>, tx: &Vector3<f64>, rx: &Vector3<f64>) -> f64 {
    (target - tx).norm() + (target - rx).norm()
}

/// Receiver range from a sum range and a receiver line of sight, i.e. the
/// intersection of that ray with the bistatic ellipsoid:
/// `R = (D² − L²) / (2 (D − L cos ψ))`.
pub fn receiver_range(
    sum_range: f64,
    azimuth: f64,
    elevation: f64,
    tx: &Vector3<f64>,
    rx: &Vector3<f64>,
) -> Result<f64> {
    let baseline = tx - rx;
    let l = baseline.norm();
    let cos_psi = if l > 0.0 {
        direction(azimuth, elevation).dot(&baseline) / l
    } else {
        0.0
    };
    let den = 2.0 * (sum_range - l * cos_psi);
    let num = sum_range * sum_range - l * l;
    if !(den > 0.0) || !(num > 0.0) || !sum_range.is_finite() {
        return Err(Error::DegenerateGeometry);
    }
    Ok(num / den)
}

pub fn bistatic_to_monostatic(m: &BistaticMeasurement, tx: &Vector3<f64>, rx: &Vector3<f64>) -> Result<f64> {
    receiver_range(m.sum_range, m.azimuth, m.elevation, tx, rx)
}

/// `∂R/∂D` of the receiver-range conversion at a given geometry.
pub fn range_sensitivity(
    sum_range: f64,
    azimuth: f64,
    elevation: f64,
    tx: &Vector3<f64>,
    rx: &Vector3<f64>,
) -> Result<f64> {
    let baseline = tx - rx;
    let l = baseline.norm();
    let cos_psi = if l > 0.0 {
        direction(azimuth, elevation).dot(&baseline) / l
    } else {
        0.0
    };
    let a = sum_range - l * cos_psi;
    if !(a > 0.0) {
        return Err(Error::DegenerateGeometry);
    }
    Ok((2.0 * sum_range * a - (sum_range * sum_range - l * l)) / (2.0 * a * a))
}

/// Standard deviations of the raw bistatic measurement.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseStds {
    pub sum_range: f64,
    pub azimuth: f64,
    pub elevation: f64,
}

impl NoiseStds {
    /// Noise of a passive-receiver measurement at a given SNR.
    pub fn for_snr(params: &RadarParams, snr: f64) -> Result<Self> {
        Ok(Self {
            sum_range: params.range_std_m,
            azimuth: angle_std(snr, params.rx_beamwidth_az_deg.to_radians())?,
            elevation: angle_std(snr, params.rx_beamwidth_el_deg.to_radians())?,
        })
    }
}

/// Covariance of (R, az, el) obtained by pushing Gaussian perturbations of
/// (D, az, el) through [`receiver_range`]. Perturbations that land on a
/// degenerate geometry are redrawn; more than 10% of `n_samples` rejected is
/// an error.
pub fn mc_covariance(
    m: &BistaticMeasurement,
    noise: &NoiseStds,
    tx: &Vector3<f64>,
    rx: &Vector3<f64>,
    n_samples: usize,
    seed: u64,
) -> Result<Matrix3<f64>> {
    if n_samples < 100 {
        return Err(Error::InvalidArgument(format!("n_samples {n_samples} < 100")));
    }
    let stds = [noise.sum_range, noise.azimuth, noise.elevation];
    if stds.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::InvalidArgument("noise standard deviations must be > 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_rejections = n_samples / 10;
    let mut rejected = 0usize;
    let mut samples: Vec<Vector3<f64>> = Vec::with_capacity(n_samples);
    while samples.len() < n_samples {
        let d = m.sum_range + noise.sum_range * rng.sample::<f64, _>(StandardNormal);
        let az = m.azimuth + noise.azimuth * rng.sample::<f64, _>(StandardNormal);
        let el = m.elevation + noise.elevation * rng.sample::<f64, _>(StandardNormal);
        match receiver_range(d, az, el, tx, rx) {
            Ok(r) => samples.push(Vector3::new(r, az, el)),
            Err(_) => {
                rejected += 1;
                if rejected > max_rejections {
                    return Err(Error::ExcessiveRejections {
                        rejected,
                        requested: n_samples,
                    });
                }
            }
        }
    }
    let n = samples.len() as f64;
    let mean = samples.iter().fold(Vector3::zeros(), |acc, s| acc + s) / n;
    let mut cov = Matrix3::zeros();
    for s in &samples {
        let dv = s - mean;
        cov += dv * dv.transpose();
    }
    cov /= n - 1.0;
    Ok((cov + cov.transpose()) * 0.5)
}

/// Threshold detector. Returns the noisy passive-receiver measurement when
/// `snr` reaches the detection threshold.
///
/// The sum range carries the clock bias `c₀ ΔT` in addition to Gaussian noise.
#[allow(clippy::too_many_arguments)]
pub fn detect<R: Rng + ?Sized>(
    params: &RadarParams,
    snr: f64,
    target: &Vector3<f64>,
    tx: &Vector3<f64>,
    rx: &Vector3<f64>,
    noise: &NoiseStds,
    clock_offset: f64,
    timestamp: f64,
    rng: &mut R,
) -> Option<BistaticMeasurement> {
    if !(snr > 0.0) || snr < params.detection_threshold() {
        return None;
    }
    let baseline = (tx - rx).norm();
    let (az, el) = az_el(&(target - rx));
    let n_d: f64 = rng.sample(StandardNormal);
    let n_az: f64 = rng.sample(StandardNormal);
    let n_el: f64 = rng.sample(StandardNormal);
    let mut d = sum_range(target, tx, rx) + range_error_from_clock(clock_offset) + noise.sum_range * n_d;
    let floor = if baseline > 0.0 {
        baseline * (1.0 + 1e-9)
    } else {
        f64::MIN_POSITIVE
    };
    if d < floor {
        d = floor;
    }
    Some(BistaticMeasurement {
        sum_range: d,
        azimuth: wrap_angle(az + noise.azimuth * n_az),
        elevation: el + noise.elevation * n_el,
        snr,
        timestamp,
    })
}
