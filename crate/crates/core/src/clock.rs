//! Receiver clock model.
//!
//! The transmitter clock is true time. The receiver offset performs a random
//! walk on a 1 s grid anchored at the last synchronisation, each step drawn
//! uniformly from `[-d, d]`; between grid points the offset is interpolated
//! linearly. A synchronisation resets the offset to zero.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Speed of light in vacuum (m/s).
pub const C0: f64 = 299_792_458.0;

/// Grid spacing of the drift walk (s).
pub const GRID_STEP: f64 = 1.0;

/// Bistatic sum-range error caused by a receiver clock offset.
pub fn range_error_from_clock(offset_s: f64) -> f64 {
    C0 * offset_s
}

#[derive(Clone, Debug)]
pub struct ClockState {
    step_bound: f64,
    rng_seed: u64,
    rng: ChaCha8Rng,
    last_sync_time: f64,
    current_time: f64,
    /// (time, offset) on the grid since the last sync; the first sample is
    /// always `(last_sync_time, 0.0)`.
    drift_samples: Vec<(f64, f64)>,
}

impl ClockState {
    /// A freshly synchronised clock at `start_time`.
    pub fn new(step_bound: f64, rng_seed: u64, start_time: f64) -> Result<Self> {
        if !step_bound.is_finite() || step_bound < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "drift step bound {step_bound} must be >= 0"
            )));
        }
        Ok(Self {
            step_bound,
            rng_seed,
            rng: ChaCha8Rng::seed_from_u64(rng_seed),
            last_sync_time: start_time,
            current_time: start_time,
            drift_samples: vec![(start_time, 0.0)],
        })
    }

    pub fn step_bound(&self) -> f64 {
        self.step_bound
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }

    pub fn last_sync_time(&self) -> f64 {
        self.last_sync_time
    }

    pub fn current_time(&self) -> f64 {
        self.current_time
    }

    pub fn drift_samples(&self) -> &[(f64, f64)] {
        &self.drift_samples
    }

    /// Seconds since the last synchronisation.
    pub fn sync_age(&self) -> f64 {
        self.current_time - self.last_sync_time
    }

    pub fn current_offset(&self) -> f64 {
        self.interpolate(self.current_time)
    }

    /// Extend the walk so that `to_time` is covered and move the clock there.
    pub fn advance(&mut self, to_time: f64) -> Result<()> {
        if to_time < self.current_time || !to_time.is_finite() {
            return Err(Error::TimeReversal {
                current: self.current_time,
                requested: to_time,
            });
        }
        loop {
            let &(t_last, off_last) = self.drift_samples.last().expect("walk always has its anchor");
            if t_last >= to_time {
                break;
            }
            let step = if self.step_bound > 0.0 {
                self.step_bound * (2.0 * self.rng.random::<f64>() - 1.0)
            } else {
                0.0
            };
            let n = self.drift_samples.len() as f64;
            self.drift_samples.push((self.last_sync_time + n * GRID_STEP, off_last + step));
        }
        self.current_time = to_time;
        Ok(())
    }

    /// Advance to `at_time`, then reset the offset to zero.
    pub fn apply_sync(&mut self, at_time: f64) -> Result<()> {
        self.advance(at_time)?;
        self.last_sync_time = at_time;
        self.drift_samples.clear();
        self.drift_samples.push((at_time, 0.0));
        Ok(())
    }

    /// Offset at any time between the last sync and the current time.
    pub fn offset_at(&self, time: f64) -> Result<f64> {
        if time < self.last_sync_time || time > self.current_time {
            return Err(Error::InvalidArgument(format!(
                "clock offset requested at {time} s outside [{}, {}]",
                self.last_sync_time, self.current_time
            )));
        }
        Ok(self.interpolate(time))
    }

    fn interpolate(&self, time: f64) -> f64 {
        let idx = ((time - self.last_sync_time) / GRID_STEP).floor().max(0.0) as usize;
        let (t0, y0) = self.drift_samples[idx.min(self.drift_samples.len() - 1)];
        match self.drift_samples.get(idx + 1) {
            Some(&(t1, y1)) => y0 + (y1 - y0) * (time - t0) / (t1 - t0),
            None => y0,
        }
    }
}
