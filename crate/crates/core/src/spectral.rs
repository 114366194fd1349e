//! Periodograms and bandwidth-smoothed spectral density estimates on the
//! Fourier grid `lambda_j = 2 pi j / n`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Result, SddError};
use crate::timeseries::TimeSeriesPanel;

/// The `n` Fourier indices `-floor((n-1)/2) ..= floor(n/2)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FourierGrid {
    n: usize,
}

impl FourierGrid {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn min_index(&self) -> i64 {
        -(((self.n - 1) / 2) as i64)
    }

    pub fn max_index(&self) -> i64 {
        (self.n / 2) as i64
    }

    pub fn indices(&self) -> impl Iterator<Item = i64> {
        self.min_index()..=self.max_index()
    }

    pub fn frequencies(&self) -> impl Iterator<Item = f64> + '_ {
        self.indices().map(move |j| fourier_frequency(j, self.n))
    }

    pub fn contains(&self, j: i64) -> bool {
        (self.min_index()..=self.max_index()).contains(&j)
    }
}

pub fn fourier_grid(n: usize) -> Result<FourierGrid> {
    if n < 2 {
        return Err(SddError::Argument(format!(
            "Fourier grid needs n >= 2, got {n}"
        )));
    }
    Ok(FourierGrid { n })
}

pub fn fourier_frequency(j: i64, n: usize) -> f64 {
    2.0 * PI * j as f64 / n as f64
}

/// Maps any integer index onto `0..n` (the FFT bin).
fn wrap_index(j: i64, n: usize) -> usize {
    j.rem_euclid(n as i64) as usize
}

/// Smoothing span `ceil(n^(2/3))`, computed in integer arithmetic.
pub fn default_bandwidth(n: usize) -> usize {
    let target = (n as u128) * (n as u128);
    let mut m = (n as f64).powf(2.0 / 3.0).floor() as u128;
    while m > 0 && (m - 1).pow(3) >= target {
        m -= 1;
    }
    while m.pow(3) < target {
        m += 1;
    }
    m as usize
}

/// Fourier index closest to `target_hz`; ties go to the smaller index.
pub fn nearest_fourier_index(target_hz: f64, n: usize, sampling_rate_hz: f64) -> Result<i64> {
    if !(sampling_rate_hz.is_finite() && sampling_rate_hz > 0.0) {
        return Err(SddError::Argument(format!(
            "sampling rate must be positive, got {sampling_rate_hz}"
        )));
    }
    let nyquist = sampling_rate_hz / 2.0;
    if !(0.0..=nyquist).contains(&target_hz) {
        return Err(SddError::Argument(format!(
            "frequency {target_hz} Hz outside [0, {nyquist}] (Nyquist)"
        )));
    }
    let x = target_hz * n as f64 / sampling_rate_hz;
    let lo = x.floor();
    let j = if x - lo <= lo + 1.0 - x { lo } else { lo + 1.0 };
    Ok(j as i64)
}

/// Smoothed periodogram at one Fourier frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralEstimate {
    pub freq_index: i64,
    pub matrix: DMatrix<Complex64>,
    pub bandwidth: usize,
    pub n: usize,
}

impl SpectralEstimate {
    pub fn frequency(&self) -> f64 {
        fourier_frequency(self.freq_index, self.n)
    }
}

/// Discrete Fourier transforms of every channel, shared by all periodogram
/// and smoothing queries on one panel.
///
/// Stores `d(lambda_k) = sum_{t=1}^{n} x_t e^{-i lambda_k t}` for each FFT bin `k`.
#[derive(Debug, Clone)]
pub struct PanelDft {
    n: usize,
    p: usize,
    // bins[k] is the p-vector d(lambda_k), k in 0..n
    bins: Vec<DVector<Complex64>>,
}

impl PanelDft {
    pub fn new(panel: &TimeSeriesPanel) -> Self {
        let (n, p) = (panel.n(), panel.p());
        let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
        let mut bins = vec![DVector::<Complex64>::zeros(p); n];
        let mut buffer = vec![Complex64::new(0.0, 0.0); n];
        for c in 0..p {
            for (slot, &x) in buffer.iter_mut().zip(panel.data().column(c).iter()) {
                *slot = Complex64::new(x, 0.0);
            }
            fft.process(&mut buffer);
            for (k, (bin, value)) in bins.iter_mut().zip(buffer.iter()).enumerate() {
                // the FFT sums over t-1 = 0..n-1; shift to t = 1..n
                let phase = Complex64::from_polar(1.0, -2.0 * PI * k as f64 / n as f64);
                bin[c] = value * phase;
            }
        }
        Self { n, p, bins }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn dft(&self, j: i64) -> &DVector<Complex64> {
        &self.bins[wrap_index(j, self.n)]
    }

    /// Raw periodogram `d d^H / (2 pi n)` at Fourier index `j`.
    pub fn periodogram(&self, j: i64) -> DMatrix<Complex64> {
        let d = self.dft(j);
        let mut out = d * d.adjoint();
        out.scale_mut(1.0 / (2.0 * PI * self.n as f64));
        make_hermitian(&mut out);
        out
    }

    /// Average of the `2M + 1` periodograms centred on `j`, wrapping indices
    /// periodically around the grid.
    pub fn smoothed(&self, j: i64, bandwidth: usize) -> Result<SpectralEstimate> {
        if bandwidth < 1 || 2 * bandwidth + 1 > self.n {
            return Err(SddError::Bandwidth {
                bandwidth,
                n: self.n,
            });
        }
        let width = 2 * bandwidth + 1;
        let m = bandwidth as i64;
        let stacked = DMatrix::from_fn(self.p, width, |r, c| self.dft(j - m + c as i64)[r]);
        let mut matrix = &stacked * stacked.adjoint();
        matrix.scale_mut(1.0 / (2.0 * PI * self.n as f64 * width as f64));
        make_hermitian(&mut matrix);
        Ok(SpectralEstimate {
            freq_index: j,
            matrix,
            bandwidth,
            n: self.n,
        })
    }
}

/// Mirrors the upper triangle onto the lower one and clears diagonal imaginary parts.
fn make_hermitian(m: &mut DMatrix<Complex64>) {
    let p = m.nrows();
    for i in 0..p {
        m[(i, i)].im = 0.0;
        for k in (i + 1)..p {
            m[(k, i)] = m[(i, k)].conj();
        }
    }
}

/// Periodogram at every index of the Fourier grid, in ascending index order.
pub fn periodogram_all(panel: &TimeSeriesPanel) -> Vec<(i64, DMatrix<Complex64>)> {
    let dft = PanelDft::new(panel);
    let grid = FourierGrid { n: panel.n() };
    grid.indices().map(|j| (j, dft.periodogram(j))).collect()
}

pub fn smoothed_periodogram(
    panel: &TimeSeriesPanel,
    freq_index: i64,
    bandwidth: usize,
) -> Result<SpectralEstimate> {
    PanelDft::new(panel).smoothed(freq_index, bandwidth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timeseries::{demean, TimeSeriesPanel};

    /// Direct O(n^2) DFT of the definition, t = 1..n.
    fn direct_periodogram(panel: &TimeSeriesPanel, j: i64) -> DMatrix<Complex64> {
        let n = panel.n();
        let lambda = fourier_frequency(j, n);
        let d = DVector::from_fn(panel.p(), |c, _| {
            (0..n)
                .map(|t| {
                    let tt = (t + 1) as f64;
                    panel.data()[(t, c)] * Complex64::from_polar(1.0, -lambda * tt)
                })
                .sum::<Complex64>()
        });
        (&d * d.adjoint()) / Complex64::new(2.0 * PI * n as f64, 0.0)
    }

    fn panel_from(data: DMatrix<f64>) -> TimeSeriesPanel {
        TimeSeriesPanel::new(data, "test").unwrap()
    }

    #[test]
    fn grid_examples() {
        let g = fourier_grid(4).unwrap();
        assert_eq!(g.indices().collect::<Vec<_>>(), vec![-1, 0, 1, 2]);
        let f: Vec<f64> = g.frequencies().collect();
        assert_eq!(f, vec![-PI / 2.0, 0.0, PI / 2.0, PI]);
        let g = fourier_grid(5).unwrap();
        assert_eq!(g.indices().collect::<Vec<_>>(), vec![-2, -1, 0, 1, 2]);
        assert!(fourier_grid(1).is_err());
    }

    #[test]
    fn bandwidth_examples() {
        assert_eq!(default_bandwidth(1000), 100);
        assert_eq!(default_bandwidth(200), 35);
        assert_eq!(default_bandwidth(100), 22);
        assert_eq!(default_bandwidth(8), 4);
        assert_eq!(default_bandwidth(2000), 159);
    }

    #[test]
    fn nearest_index_examples() {
        assert_eq!(nearest_fourier_index(0.0, 512, 512.0).unwrap(), 0);
        assert_eq!(nearest_fourier_index(8.0, 512, 512.0).unwrap(), 8);
        // 8 Hz at n=100, fs=512 is 1.5625 bins
        assert_eq!(nearest_fourier_index(8.0, 100, 512.0).unwrap(), 2);
        // exact tie between bins 0 and 1 resolves downward
        assert_eq!(nearest_fourier_index(2.56, 100, 512.0).unwrap(), 0);
        assert!(nearest_fourier_index(300.0, 512, 512.0).is_err());
    }

    #[test]
    fn zero_panel_gives_zero_periodograms() {
        let panel = panel_from(DMatrix::zeros(8, 2));
        for (_, p) in periodogram_all(&panel) {
            assert!(p.iter().all(|z| z.norm() == 0.0));
        }
        let s = smoothed_periodogram(&panel, 1, 2).unwrap();
        assert!(s.matrix.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn cosine_concentrates_at_first_harmonic() {
        let n = 64;
        let data = DMatrix::from_fn(n, 1, |t, _| (2.0 * PI * (t + 1) as f64 / n as f64).cos());
        let panel = panel_from(data);
        let all = periodogram_all(&panel);
        for (j, p) in &all {
            let oracle = direct_periodogram(&panel, *j);
            assert!((p[(0, 0)] - oracle[(0, 0)]).norm() < 1e-10);
            if j.abs() > 1 {
                assert!(p[(0, 0)].norm() < 1e-10, "j={j}: {}", p[(0, 0)]);
            }
        }
        let peak = all.iter().find(|(j, _)| *j == 1).unwrap().1[(0, 0)].re;
        // |d|^2 = (n/2)^2
        assert!((peak - (n as f64 / 2.0).powi(2) / (2.0 * PI * n as f64)).abs() < 1e-10);
    }

    #[test]
    fn negative_index_is_conjugate() {
        let data = DMatrix::from_fn(9, 3, |t, c| ((t * 7 + c * 3) % 5) as f64 - 1.3 * c as f64);
        let panel = panel_from(data);
        let dft = PanelDft::new(&panel);
        for j in 1..=4 {
            let a = dft.periodogram(j);
            let b = dft.periodogram(-j);
            for (x, y) in a.iter().zip(b.iter()) {
                assert!((x.conj() - y).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn full_bandwidth_is_frequency_independent() {
        let data = DMatrix::from_fn(7, 2, |t, c| ((t + 1) * (c + 2)) as f64 % 3.0);
        let panel = demean(&panel_from(data));
        let dft = PanelDft::new(&panel);
        let base = dft.smoothed(0, 3).unwrap().matrix;
        for j in -3..=3 {
            let other = dft.smoothed(j, 3).unwrap().matrix;
            for (x, y) in base.iter().zip(other.iter()) {
                assert!((x - y).norm() < 1e-12);
            }
        }
        assert!(matches!(
            dft.smoothed(0, 4),
            Err(SddError::Bandwidth { bandwidth: 4, n: 7 })
        ));
        assert!(dft.smoothed(0, 0).is_err());
    }
}
