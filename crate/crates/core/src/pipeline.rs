//! End-to-end driver: two panels in, per-frequency difference estimates out.
//!
//! Frequencies are independent jobs. Each job only reads the shared
//! transforms, so results do not depend on how many workers run them.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{naive_difference, tune_hard_threshold, TunedThreshold};
use crate::dtrace::DifferenceEstimate;
use crate::error::{Result, SddError};
use crate::realspace::{expand, ExpandedMatrix};
use crate::spectral::{default_bandwidth, fourier_frequency, PanelDft, SpectralEstimate};
use crate::timeseries::{demean, TimeSeriesPanel};
use crate::tuning::{tune_sdd, TunedEstimate, TuningConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Sdd,
    Naive,
    Hard,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Sdd, Method::Naive, Method::Hard];

    pub fn name(self) -> &'static str {
        match self {
            Method::Sdd => "sdd",
            Method::Naive => "naive",
            Method::Hard => "hard",
        }
    }
}

/// Number of Fourier frequencies in `[0, pi - 1/n]`.
pub fn available_frequencies(n: usize) -> usize {
    ((PI - 1.0 / n as f64) * n as f64 / (2.0 * PI)).floor() as usize + 1
}

/// Nearest Fourier index to an angular frequency in `[0, pi]`; ties go down.
pub fn nearest_index_for_angle(lambda: f64, n: usize) -> Result<i64> {
    if !(0.0..=PI).contains(&lambda) {
        return Err(SddError::Argument(format!(
            "angular frequency {lambda} outside [0, pi]"
        )));
    }
    crate::spectral::nearest_fourier_index(lambda / (2.0 * PI), n, 1.0)
}

/// `count` evenly spaced frequencies from 0 to `pi - 1/n`, snapped to the
/// Fourier grid. When the interval holds no more than `count` Fourier
/// frequencies, all of them are returned.
pub fn evaluation_grid(n: usize, count: usize) -> Result<Vec<i64>> {
    if n < 2 || count == 0 {
        return Err(SddError::Argument(format!(
            "evaluation grid needs n >= 2 and count >= 1, got n={n}, count={count}"
        )));
    }
    let available = available_frequencies(n);
    if available <= count {
        return Ok((0..available as i64).collect());
    }
    let top = PI - 1.0 / n as f64;
    let mut indices: Vec<i64> = (0..count)
        .map(|k| {
            let lambda = if count == 1 {
                0.0
            } else {
                top * k as f64 / (count - 1) as f64
            };
            nearest_index_for_angle(lambda, n).map(|j| j.min(available as i64 - 1))
        })
        .collect::<Result<_>>()?;
    indices.dedup();
    Ok(indices)
}

/// Named EEG bands as lists of frequencies in Hz.
pub fn band_frequencies(name: &str) -> Result<Vec<f64>> {
    let hz: &[f64] = match name.to_ascii_lowercase().as_str() {
        "theta" => &[4.0, 5.0, 6.0, 7.0, 8.0],
        "beta" => &[12.0, 16.0, 20.0, 24.0, 28.0],
        "gamma" => &[30.0, 35.0, 40.0, 45.0, 50.0],
        "high-gamma" | "high_gamma" | "highgamma" => &[70.0, 80.0, 90.0, 100.0, 110.0],
        other => {
            return Err(SddError::Argument(format!(
                "unknown band {other:?}; expected theta, beta, gamma or high-gamma"
            )))
        }
    };
    Ok(hz.to_vec())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimateConfig {
    /// Overrides `ceil(n^(2/3))` for both conditions.
    pub bandwidth: Option<usize>,
    pub tuning: TuningConfig,
    pub methods: Vec<Method>,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        Self {
            bandwidth: None,
            tuning: TuningConfig::default(),
            methods: vec![Method::Sdd],
        }
    }
}

/// Shared, read-only inputs for all frequency jobs.
#[derive(Debug, Clone)]
pub struct Conditions {
    pub dft1: PanelDft,
    pub dft2: PanelDft,
}

impl Conditions {
    /// De-means both panels and transforms them.
    pub fn new(panel1: &TimeSeriesPanel, panel2: &TimeSeriesPanel) -> Result<Self> {
        if panel1.p() != panel2.p() {
            return Err(SddError::Argument(format!(
                "conditions have {} and {} channels",
                panel1.p(),
                panel2.p()
            )));
        }
        Ok(Self {
            dft1: PanelDft::new(&demean(panel1)),
            dft2: PanelDft::new(&demean(panel2)),
        })
    }

    pub fn n1(&self) -> usize {
        self.dft1.n()
    }

    pub fn n2(&self) -> usize {
        self.dft2.n()
    }
}

/// Where one requested frequency lands on each condition's grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyTarget {
    pub index1: i64,
    pub index2: i64,
    pub lambda: f64,
}

impl FrequencyTarget {
    pub fn from_index(j: i64, conditions: &Conditions) -> Result<Self> {
        let lambda = fourier_frequency(j, conditions.n1());
        let index2 = if conditions.n1() == conditions.n2() {
            j
        } else {
            nearest_index_for_angle(lambda.abs(), conditions.n2())? * j.signum().max(1)
        };
        Ok(Self {
            index1: j,
            index2,
            lambda,
        })
    }
}

#[derive(Debug)]
pub struct FrequencyResult {
    pub target: FrequencyTarget,
    pub spectral1: SpectralEstimate,
    pub spectral2: SpectralEstimate,
    pub sdd: Option<Result<TunedEstimate>>,
    pub naive: Option<Result<DifferenceEstimate>>,
    pub hard: Option<Result<TunedThreshold>>,
}

impl FrequencyResult {
    pub fn estimate(&self, method: Method) -> Option<Result<&DifferenceEstimate, &SddError>> {
        match method {
            Method::Sdd => self.sdd.as_ref().map(|r| r.as_ref().map(|t| &t.estimate)),
            Method::Naive => self.naive.as_ref().map(|r| r.as_ref()),
            Method::Hard => self.hard.as_ref().map(|r| r.as_ref().map(|t| &t.estimate)),
        }
    }
}

/// Runs every requested method at one frequency. Method failures are kept in
/// the result; only spectral estimation errors abort the frequency.
pub fn estimate_frequency(
    conditions: &Conditions,
    target: FrequencyTarget,
    config: &EstimateConfig,
) -> Result<FrequencyResult> {
    let (n1, n2) = (conditions.n1(), conditions.n2());
    let m1 = config.bandwidth.unwrap_or_else(|| default_bandwidth(n1));
    let m2 = config.bandwidth.unwrap_or_else(|| default_bandwidth(n2));
    let spectral1 = conditions.dft1.smoothed(target.index1, m1)?;
    let spectral2 = conditions.dft2.smoothed(target.index2, m2)?;
    let s1: ExpandedMatrix = expand(&spectral1.matrix);
    let s2: ExpandedMatrix = expand(&spectral2.matrix);
    let wants = |m: Method| config.methods.contains(&m);
    let tuning = &config.tuning;

    let sdd = wants(Method::Sdd).then(|| tune_sdd(&s1, &s2, n1, n2, tuning));
    let naive = wants(Method::Naive).then(|| naive_difference(&s1, &s2));
    let hard = wants(Method::Hard).then(|| {
        tune_hard_threshold(&s1, &s2, n1, n2, tuning.gamma, tuning.fit_term, tuning.path_len)
    });
    Ok(FrequencyResult {
        target,
        spectral1,
        spectral2,
        sdd,
        naive,
        hard,
    })
}

/// Estimates at every index (condition-1 grid) on a pool of `jobs` workers.
/// Results come back in request order.
pub fn estimate_frequencies(
    conditions: &Conditions,
    indices: &[i64],
    config: &EstimateConfig,
    jobs: usize,
) -> Result<Vec<Result<FrequencyResult>>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| SddError::Argument(format!("thread pool: {e}")))?;
    Ok(pool.install(|| {
        indices
            .par_iter()
            .map(|&j| {
                FrequencyTarget::from_index(j, conditions)
                    .and_then(|t| estimate_frequency(conditions, t, config))
                    .map_err(|e| e.at_frequency(j))
            })
            .collect()
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_counts() {
        assert_eq!(available_frequencies(100), 50);
        assert_eq!(evaluation_grid(100, 100).unwrap(), (0..50).collect::<Vec<_>>());
        let g = evaluation_grid(2000, 100).unwrap();
        assert_eq!(g.len(), 100);
        assert_eq!(g[0], 0);
        assert!(*g.last().unwrap() <= 999);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        let ten = evaluation_grid(2000, 10).unwrap();
        assert_eq!(ten.len(), 10);
    }

    #[test]
    fn bands() {
        assert_eq!(band_frequencies("Theta").unwrap(), vec![4.0, 5.0, 6.0, 7.0, 8.0]);
        assert_eq!(band_frequencies("beta").unwrap()[4], 28.0);
        assert!(band_frequencies("delta").is_err());
    }

    #[test]
    fn angle_out_of_range() {
        assert!(nearest_index_for_angle(4.0, 100).is_err());
        assert_eq!(nearest_index_for_angle(PI, 100).unwrap(), 50);
    }
}
