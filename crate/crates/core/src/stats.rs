//! Summary statistics of tracking errors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Median, extremes, mean and population standard deviation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub median: f64,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

impl Summary {
    /// Even-length medians are the midpoint of the two central values; the
    /// standard deviation divides by `n`.
    pub fn of(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptySamples);
        }
        if samples.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("samples must be finite".into()));
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let median = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
        };
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        Ok(Self {
            median,
            min: sorted[0],
            max: sorted[n - 1],
            mean,
            std: var.sqrt(),
            count: n,
        })
    }
}

/// Unbiased sample variance (divides by `n - 1`).
pub fn sample_variance(samples: &[f64]) -> Option<f64> {
    if samples.len() < 2 {
        return None;
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    Some(samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0))
}
