//! Analysis layer: curve fitting, spectra, sensitivity extraction, and coil
//! calibration.

pub mod calibrate;
pub mod fit;
pub mod sensitivity;
pub mod spectrum;

pub use calibrate::{calibrate_coil, find_linear_window, CoilCalibration};
pub use fit::{FitModel, FitOptions, FitResult};
pub use sensitivity::{
    contrast, delta_b_per_fringe_half, magnetometer_sensitivity, shot_noise_dc_sensitivity,
    SensitivityReport, SigmaMode,
};
pub use spectrum::{fft_spectrum, noise_spectral_density, FftSpectrum, FftWindow, NoiseSpectrum};

use crate::error::{Error, Result};
use fit::{DecayModelFit, MultiLorentzianDip};

/// Fit a sum of `n_dips` Lorentzian dips (2 or 4) on a constant baseline.
/// Dip parameters in the result are sorted by center frequency; layout is
/// [baseline, (center, fwhm, depth) * n_dips].
pub fn fit_lorentzian_multi(xs: &[f64], ys: &[f64], n_dips: usize) -> Result<FitResult> {
    if !(n_dips == 2 || n_dips == 4) {
        return Err(Error::invalid(format!(
            "n_dips must be 2 or 4, got {n_dips}"
        )));
    }
    let n = xs.len();
    if n != ys.len() || n < 8 * n_dips {
        return Err(Error::InsufficientData(format!(
            "{n_dips}-dip fit needs >= {} points, got {n}",
            8 * n_dips
        )));
    }

    // baseline from the upper decile
    let mut sorted = ys.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let baseline = sorted[(sorted.len() * 9) / 10];

    // candidate dips: local minima ranked by depth, separated by a minimum gap
    let mut minima: Vec<(usize, f64)> = Vec::new();
    for i in 1..n - 1 {
        if ys[i] <= ys[i - 1] && ys[i] < ys[i + 1] {
            minima.push((i, baseline - ys[i]));
        }
    }
    minima.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    let span = xs[n - 1] - xs[0];
    let min_gap = span / (6.0 * n_dips as f64);
    let mut picked: Vec<usize> = Vec::new();
    for (idx, _) in &minima {
        if picked.iter().all(|&p| (xs[*idx] - xs[p]).abs() >= min_gap) {
            picked.push(*idx);
            if picked.len() == n_dips {
                break;
            }
        }
    }
    if picked.len() < n_dips {
        return Err(Error::InsufficientData(format!(
            "found only {} resolvable dips of {n_dips} requested",
            picked.len()
        )));
    }
    picked.sort_unstable();

    // width seed: half-depth crossing around the deepest dip
    let deepest = *picked
        .iter()
        .min_by(|a, b| ys[**a].partial_cmp(&ys[**b]).unwrap())
        .unwrap();
    let half_level = (baseline + ys[deepest]) / 2.0;
    let mut left = deepest;
    while left > 0 && ys[left] < half_level {
        left -= 1;
    }
    let mut right = deepest;
    while right + 1 < n && ys[right] < half_level {
        right += 1;
    }
    let fwhm0 = (xs[right] - xs[left]).abs().max(span / n as f64 * 2.0);

    let mut init = Vec::with_capacity(1 + 3 * n_dips);
    init.push(baseline);
    for &idx in &picked {
        init.push(xs[idx]);
        init.push(fwhm0);
        init.push((baseline - ys[idx]).max(1e-12));
    }

    let model = MultiLorentzianDip { n_dips };
    let mut res = fit::fit(&model, xs, ys, &init, &FitOptions::default())?;
    sort_dips(&mut res, n_dips);
    Ok(res)
}

fn sort_dips(res: &mut FitResult, n_dips: usize) {
    let mut order: Vec<usize> = (0..n_dips).collect();
    let centers: Vec<f64> = (0..n_dips).map(|i| res.params[1 + 3 * i]).collect();
    order.sort_by(|a, b| centers[*a].partial_cmp(&centers[*b]).unwrap());
    let params = res.params.clone();
    let uncerts = res.uncertainties.clone();
    for (slot, &src) in order.iter().enumerate() {
        for f in 0..3 {
            res.params[1 + 3 * slot + f] = params[1 + 3 * src + f];
            res.uncertainties[1 + 3 * slot + f] = uncerts[1 + 3 * src + f];
        }
    }
}

/// Which decay law to fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DecayKind {
    /// A exp(-t/T): the Ramsey envelope.
    Exponential,
    /// A exp(-(t/T)^p) with fixed p: the echo envelope.
    Stretched(f64),
}

impl DecayKind {
    fn exponent(self) -> f64 {
        match self {
            DecayKind::Exponential => 1.0,
            DecayKind::Stretched(p) => p,
        }
    }
}

/// Fit y = c + A exp(-(t/T)^p) on a monotone-envelope trace. Parameter layout
/// is [offset, amplitude, time constant].
pub fn fit_decay(xs: &[f64], ys: &[f64], kind: DecayKind) -> Result<FitResult> {
    let n = xs.len();
    if n != ys.len() || n < 8 {
        return Err(Error::InsufficientData(
            "decay fit needs >= 8 points".into(),
        ));
    }
    let tail = &ys[n - n / 6 - 1..];
    let c0 = tail.iter().sum::<f64>() / tail.len() as f64;
    let a0 = ys[0] - c0;
    // time-constant seed: first crossing of 1/e of the initial deviation
    let threshold = c0 + a0 / std::f64::consts::E;
    let t0 = xs
        .iter()
        .zip(ys)
        .find(|(_, &y)| {
            if a0 > 0.0 {
                y < threshold
            } else {
                y > threshold
            }
        })
        .map(|(&x, _)| x)
        .unwrap_or(xs[n / 2])
        .max(xs[1].abs());
    let model = DecayModelFit {
        stretch_q: kind.exponent(),
    };
    fit::fit(&model, xs, ys, &[c0, a0, t0], &FitOptions::default())
}

/// Envelope of an oscillatory decaying trace by windowed RMS demodulation.
///
/// The windowed mean of the squared deviation from the asymptote is
/// `envelope(t)^2 * w + sigma^2`, with `w` a waveform constant (1/2 for one
/// tone, 1/4 for the two-branch beat) and `sigma^2` the per-point noise
/// variance. The noise term is estimated from the trace tail and subtracted,
/// so the returned shape is unbiased by shot noise; the constant `w` only
/// scales the amplitude, never the time constant. The window spans one
/// period of the slowest beat so cross terms average out, and for an
/// exponential envelope the windowing itself is another constant factor.
///
/// Returns (window-center times, envelope-scale values); windows whose power
/// fell below the noise floor surface as zero.
pub fn extract_envelope(xs: &[f64], ys: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let (ts, powers, _) = windowed_signal_power(xs, ys, None)?;
    let vs = powers.iter().map(|p| p.max(0.0).sqrt()).collect();
    Ok((ts, vs))
}

/// Fit the decay time of an oscillatory trace through its demodulated
/// envelope, working in the power domain where the shot-noise bias subtracts
/// exactly and negative noise excursions need no truncation.
///
/// The windowed signal power follows `P(t) = P0 exp(-2 (t/T)^q)`. A first
/// unweighted pass seeds inverse-variance weights
/// `w = 1 / (P_pred + sigma^2)^2` for the second pass. The returned
/// parameters are the amplitude (not power) scale and the time constant T.
pub fn fit_decay_envelope(
    xs: &[f64],
    ys: &[f64],
    sigma: Option<&[f64]>,
    kind: DecayKind,
) -> Result<FitResult> {
    let q = kind.exponent();
    // the power of an exp(-(t/T)^q) envelope decays as exp(-2 (t/T)^q),
    // i.e. the same exponent with time constant T * 2^(-1/q)
    let (ts, powers, noise_power) = windowed_signal_power(xs, ys, sigma)?;
    let model = fit::EnvelopeDecay { stretch_q: q };

    let p0 = powers.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(p0 > 0.0) {
        return Err(Error::InsufficientData(
            "no signal power above the noise floor".into(),
        ));
    }
    let threshold = p0 / std::f64::consts::E.powi(2);
    let t0 = ts
        .iter()
        .zip(&powers)
        .find(|(_, &v)| v < threshold)
        .map(|(&t, _)| t)
        .unwrap_or(ts[ts.len() / 2])
        .max(ts[0].abs().max(1e-12));

    let opts = FitOptions::default();
    let first = fit::fit(&model, &ts, &powers, &[p0, t0], &opts)?;
    let mut grad = vec![0.0; 2];
    let floor = (p0 * 1e-6).max(1e-300);
    let weights: Vec<f64> = ts
        .iter()
        .map(|&t| {
            let pred = model.eval(t, &first.params, &mut grad).max(0.0);
            1.0 / (pred + noise_power).max(floor).powi(2)
        })
        .collect();
    let mut result = fit::fit_weighted(&model, &ts, &powers, Some(&weights), &first.params, &opts)?;

    // report in amplitude convention: sqrt of the power scale and the
    // amplitude time constant T = T_power * 2^(1/q)
    let back = 2f64.powf(1.0 / q);
    result.params[0] = result.params[0].max(0.0).sqrt();
    result.params[1] = result.params[1].abs() * back;
    result.uncertainties[1] = result.uncertainties[1].abs() * back;
    Ok(result)
}

/// Windowed mean power of the deviation from the asymptote with the
/// noise-floor power subtracted; the envelope demodulation core shared by
/// [`extract_envelope`] and [`fit_decay_envelope`]. When the per-point
/// measurement sigma is available the noise floor is its exact mean square;
/// otherwise it falls back to the tail power of the trace.
fn windowed_signal_power(
    xs: &[f64],
    ys: &[f64],
    sigma: Option<&[f64]>,
) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let n = xs.len();
    if n != ys.len() || n < 32 {
        return Err(Error::InsufficientData(
            "envelope extraction needs >= 32 points".into(),
        ));
    }
    let tail_start = n - n / 5 - 1;
    let asymptote = ys[tail_start..].iter().sum::<f64>() / (n - tail_start) as f64;
    let dev2: Vec<f64> = ys
        .iter()
        .map(|y| (y - asymptote) * (y - asymptote))
        .collect();

    // window: one period of the slowest spectral structure (the beat when
    // two peaks resolve, the oscillation itself otherwise)
    let dx = (xs[n - 1] - xs[0]) / (n as f64 - 1.0);
    let spec = fft_spectrum(ys, dx, FftWindow::Rectangular)?;
    let f_slow = match spec.two_peak_frequencies() {
        Some((f1, f2)) if (f1 - f2).abs() > spec.bin_width * 1.5 => (f1 - f2).abs(),
        _ => spec.peak_frequency(),
    };
    if !(f_slow > 0.0) {
        return Err(Error::InsufficientData(
            "no oscillation found for envelope demodulation".into(),
        ));
    }
    let window = ((1.0 / f_slow / dx).round() as usize).clamp(8, n / 3);

    // noise power: exact from the per-point sigmas when available, else the
    // tail of the trace (where the envelope has decayed away)
    let noise_power = match sigma {
        Some(sg) => {
            if sg.len() != n {
                return Err(Error::invalid("sigma length must match the trace"));
            }
            sg.iter().map(|s| s * s).sum::<f64>() / n as f64
        }
        None => dev2[n - window..].iter().sum::<f64>() / window as f64,
    };

    let mut ts = Vec::new();
    let mut powers = Vec::new();
    let step = (window / 4).max(1);
    let mut lo = 0usize;
    while lo + window <= n {
        let m2 = dev2[lo..lo + window].iter().sum::<f64>() / window as f64;
        ts.push((xs[lo] + xs[lo + window - 1]) / 2.0);
        powers.push(m2 - noise_power);
        lo += step;
    }
    if ts.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "only {} envelope windows",
            ts.len()
        )));
    }
    Ok((ts, powers, noise_power))
}

/// Average echo time constant over the two phase-inverted Hahn variants.
pub struct HahnPairFit {
    pub t2_average: f64,
    pub fits: [FitResult; 2],
}

pub fn fit_decay_hahn_pair(
    xs: &[f64],
    ys_phase0: &[f64],
    ys_phase180: &[f64],
    kind: DecayKind,
) -> Result<HahnPairFit> {
    let a = fit_decay(xs, ys_phase0, kind)?;
    let b = fit_decay(xs, ys_phase180, kind)?;
    let t2_average = (a.params[2].abs() + b.params[2].abs()) / 2.0;
    Ok(HahnPairFit {
        t2_average,
        fits: [a, b],
    })
}

/// Spectrum of a trace given sweep coordinates; rejects non-uniform sampling.
pub fn fft_spectrum_of_trace(xs: &[f64], ys: &[f64], window: FftWindow) -> Result<FftSpectrum> {
    let n = xs.len();
    if n != ys.len() || n < 4 {
        return Err(Error::InsufficientData("spectrum needs >= 4 points".into()));
    }
    let dx = (xs[n - 1] - xs[0]) / (n as f64 - 1.0);
    for i in 1..n {
        let step = xs[i] - xs[i - 1];
        if (step - dx).abs() > 1e-6 * dx.abs() {
            return Err(Error::invalid(format!(
                "non-uniform sampling at index {i}: step {step:.6e} vs {dx:.6e}"
            )));
        }
    }
    fft_spectrum(ys, dx, window)
}
