//! FFT amplitude spectra and the noise-floor pipeline.

use crate::error::{Error, Result};
use rustfft::{num_complex::Complex64, FftPlanner};
use serde::{Deserialize, Serialize};

/// Window function applied before the transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FftWindow {
    Rectangular,
    Hann,
}

impl FftWindow {
    fn value(self, i: usize, n: usize) -> f64 {
        match self {
            FftWindow::Rectangular => 1.0,
            FftWindow::Hann => {
                let x = std::f64::consts::PI * i as f64 / n as f64;
                let s = x.sin();
                2.0 * s * s
            }
        }
    }
}

/// One-sided amplitude spectrum of a uniformly sampled real signal.
///
/// Amplitudes are peak-equivalent: a bin-centered cosine of amplitude A under
/// the rectangular window produces a single bin of value A (coherent-gain
/// corrected for other windows). The raw windowed-signal energy is retained so
/// the Parseval identity stays checkable exactly.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FftSpectrum {
    /// Bin frequencies, Hz (k = 1 ..= n/2; DC is removed with the mean).
    pub frequencies: Vec<f64>,
    /// Peak-equivalent amplitudes per bin.
    pub amplitudes: Vec<f64>,
    /// Frequency resolution, Hz.
    pub bin_width: f64,
    /// Fold factor per bin (2 except the Nyquist bin of an even-length input).
    fold: Vec<f64>,
    /// Coherent gain (sum of window values).
    window_sum: f64,
    n: usize,
}

impl FftSpectrum {
    /// Energy of the windowed, mean-removed signal reconstructed from the
    /// spectrum: sum_k fold_k |X_k|^2 / n. Equals sum_n (w_n (x_n - mean))^2
    /// exactly (Parseval), which the tests verify.
    pub fn energy(&self) -> f64 {
        let w2_over_n = self.window_sum * self.window_sum / self.n as f64;
        self.amplitudes
            .iter()
            .zip(&self.fold)
            .map(|(a, eps)| a * a / eps)
            .sum::<f64>()
            * w2_over_n
    }

    /// Frequency of the largest-amplitude bin.
    pub fn peak_frequency(&self) -> f64 {
        let mut best = 0;
        for i in 1..self.amplitudes.len() {
            if self.amplitudes[i] > self.amplitudes[best] {
                best = i;
            }
        }
        self.frequencies[best]
    }

    /// The two strongest local maxima, by descending amplitude.
    pub fn two_peak_frequencies(&self) -> Option<(f64, f64)> {
        let a = &self.amplitudes;
        let mut peaks: Vec<(f64, f64)> = Vec::new();
        for i in 0..a.len() {
            let left = if i == 0 { f64::NEG_INFINITY } else { a[i - 1] };
            let right = if i + 1 == a.len() {
                f64::NEG_INFINITY
            } else {
                a[i + 1]
            };
            if a[i] >= left && a[i] > right {
                peaks.push((a[i], self.frequencies[i]));
            }
        }
        peaks.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap());
        if peaks.len() < 2 {
            return None;
        }
        Some((peaks[0].1, peaks[1].1))
    }
}

/// Compute the one-sided amplitude spectrum of `values` sampled every `dt`
/// seconds. The mean is removed before windowing.
pub fn fft_spectrum(values: &[f64], dt: f64, window: FftWindow) -> Result<FftSpectrum> {
    let n = values.len();
    if n < 4 {
        return Err(Error::InsufficientData(format!(
            "need at least 4 samples for a spectrum, got {n}"
        )));
    }
    if !(dt > 0.0) {
        return Err(Error::invalid(format!(
            "sample spacing must be > 0, got {dt}"
        )));
    }

    // window-weighted mean removal keeps the DC bin exactly zero for every
    // window, which the Parseval accounting below relies on
    let mut window_sum = 0.0;
    let mut weighted = 0.0;
    for (i, v) in values.iter().enumerate() {
        let w = window.value(i, n);
        window_sum += w;
        weighted += w * v;
    }
    let mean = weighted / window_sum;
    let mut buf: Vec<Complex64> = (0..n)
        .map(|i| Complex64::new(window.value(i, n) * (values[i] - mean), 0.0))
        .collect();

    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);

    let half = n / 2;
    let fs = 1.0 / dt;
    let bin_width = fs / n as f64;
    let mut frequencies = Vec::with_capacity(half);
    let mut amplitudes = Vec::with_capacity(half);
    let mut fold = Vec::with_capacity(half);
    for (k, value) in buf.iter().enumerate().take(half + 1).skip(1) {
        let eps = if n.is_multiple_of(2) && k == half {
            1.0
        } else {
            2.0
        };
        frequencies.push(k as f64 * bin_width);
        amplitudes.push(eps * value.norm() / window_sum);
        fold.push(eps);
    }

    Ok(FftSpectrum {
        frequencies,
        amplitudes,
        bin_width,
        fold,
        window_sum,
        n,
    })
}

/// Frequency band over which the flat noise floor is averaged, Hz.
/// Excludes the DC bin and the Nyquist edge of a 1 kHz acquisition.
pub const NOISE_FLOOR_BAND: (f64, f64) = (10.0, 450.0);

/// Amplitude spectral density of a photon-count time trace referred to
/// magnetic field through the magnetometer slope.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoiseSpectrum {
    /// Bin frequencies, Hz.
    pub frequencies: Vec<f64>,
    /// Field-referred amplitude density per bin, T/sqrt(Hz).
    pub density: Vec<f64>,
    /// Quadratic mean of the density over the declared band, T/sqrt(Hz).
    pub mean_floor: f64,
    /// Band used for `mean_floor`, Hz.
    pub band: (f64, f64),
    /// Acquisition duration, s.
    pub duration: f64,
    /// Sampling rate, Hz.
    pub sampling_rate: f64,
}

/// Turn a count trace (counts per sample at `sampling_rate`) into a
/// field-referred noise spectrum by dividing the one-sided amplitude
/// spectral density by `slope` (counts per sample per Tesla).
pub fn noise_spectral_density(
    counts: &[f64],
    sampling_rate: f64,
    slope: f64,
) -> Result<NoiseSpectrum> {
    if !(slope > 0.0) {
        return Err(Error::invalid(format!("slope must be > 0, got {slope}")));
    }
    if !(sampling_rate > 0.0) {
        return Err(Error::invalid("sampling rate must be > 0"));
    }
    let n = counts.len();
    let duration = n as f64 / sampling_rate;
    if duration < 1.0 {
        return Err(Error::InsufficientData(format!(
            "noise floor needs >= 1 s of data, got {duration:.3} s"
        )));
    }

    let spec = fft_spectrum(counts, 1.0 / sampling_rate, FftWindow::Rectangular)?;
    // one-sided PSD per bin: fold * |X|^2 / (n * fs); with the rectangular
    // window the peak amplitude a = fold*|X|/n, so PSD = a^2 * n / (fold * fs)
    let nf = n as f64;
    let density: Vec<f64> = spec
        .amplitudes
        .iter()
        .zip(&spec.fold)
        .map(|(a, eps)| (a * a * nf / (eps * sampling_rate)).sqrt() / slope)
        .collect();

    let band = NOISE_FLOOR_BAND;
    let mut acc = 0.0;
    let mut count = 0usize;
    for (f, d) in spec.frequencies.iter().zip(&density) {
        if *f >= band.0 && *f <= band.1 {
            acc += d * d;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::InsufficientData(
            "no spectral bins inside the noise-floor band".into(),
        ));
    }
    let mean_floor = (acc / count as f64).sqrt();

    Ok(NoiseSpectrum {
        frequencies: spec.frequencies,
        density,
        mean_floor,
        band,
        duration,
        sampling_rate,
    })
}
