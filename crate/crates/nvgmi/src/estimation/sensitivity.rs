//! Sensitivity extraction: the shot-noise DC figure from a linewidth, the
//! fringe-slope minimum detectable field, and the full magnetometry report.

use crate::constants::{G_ELECTRON, MU_BOHR, PLANCK_H};
use crate::error::{Error, Result};
use crate::estimation::fit::{self, FitOptions, FitResult, Sinusoid};
use crate::estimation::spectrum::{fft_spectrum, FftWindow};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Photon-shot-noise-limited DC field resolution from an ODMR/Ramsey
/// linewidth: delta_B = h * fwhm / (g * mu_B).
pub fn shot_noise_dc_sensitivity(fwhm: f64) -> Result<f64> {
    if !(fwhm >= 0.0) || !fwhm.is_finite() {
        return Err(Error::invalid(format!("fwhm must be >= 0, got {fwhm}")));
    }
    Ok(PLANCK_H * fwhm / (G_ELECTRON * MU_BOHR))
}

/// Magnetometer contrast from the standard deviations of the two
/// phase-inverted datasets: (m1 - m2) / (m1 + m2).
pub fn contrast(m1: f64, m2: f64) -> Result<f64> {
    if m1 < 0.0 || m2 < 0.0 {
        return Err(Error::invalid("standard deviations must be >= 0"));
    }
    if m1 + m2 == 0.0 {
        return Err(Error::UndefinedContrast);
    }
    Ok((m1 - m2) / (m1 + m2))
}

/// Field change that drives the synchronized echo signal through half an
/// oscillation: delta_B = 1 / (2 tau * gamma_e).
pub fn delta_b_per_fringe_half(two_tau: f64, gyro_e: f64) -> Result<f64> {
    if !(two_tau > 0.0) {
        return Err(Error::invalid(format!(
            "two_tau must be > 0, got {two_tau}"
        )));
    }
    Ok(1.0 / (two_tau * gyro_e))
}

/// How the per-point signal noise is determined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SigmaMode {
    /// Estimated from the sinusoid-fit residuals (the default; mirrors
    /// dividing the fit error by the maximum slope).
    FromResiduals,
    /// Analytic Poisson sigma of the per-point mean: sqrt(mean level / n).
    AnalyticPoisson,
    /// Supplied externally.
    Provided(f64),
}

/// Slope / B_min / eta_dc summary for one magnetometry run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SensitivityReport {
    /// Per-point signal standard deviation, photons/shot.
    pub sigma_s: f64,
    /// Maximum slope of the fitted response, photons/shot per Tesla.
    pub slope: f64,
    /// Minimum detectable field sigma_s / slope, Tesla.
    pub b_min: f64,
    /// Total measurement time n * 2tau, s.
    pub measurement_time_t: f64,
    /// DC sensitivity b_min * sqrt(t), T/sqrt(Hz).
    pub eta_dc: f64,
    /// Number of full fringes the sweep spans.
    pub fringe_count: f64,
    /// The sinusoid fit behind the numbers.
    pub fit: FitResult,
}

/// Fit S(B) = a + c cos(2 pi B / P + phi0) with a multi-start over 8
/// period/phase initializations (fringe fitting is multimodal), then apply
/// the slope formula: max slope = 2 pi |c| / P.
pub fn magnetometer_sensitivity(
    b_values: &[f64],
    signal: &[f64],
    two_tau: f64,
    n_shots: u64,
    sigma_mode: SigmaMode,
) -> Result<SensitivityReport> {
    if b_values.len() != signal.len() || b_values.len() < 8 {
        return Err(Error::InsufficientData(
            "magnetometry needs >= 8 matched points".into(),
        ));
    }
    if !(two_tau > 0.0) || n_shots == 0 {
        return Err(Error::invalid("two_tau must be > 0 and n_shots >= 1"));
    }

    let fit = fit_fringe_sinusoid(b_values, signal)?;
    let amplitude = fit.params[1].abs();
    let period = fit.params[2].abs();
    let span = b_values[b_values.len() - 1] - b_values[0];
    let fringe_count = span.abs() / period;
    if fringe_count < 1.0 {
        return Err(Error::InsufficientData(format!(
            "sweep spans only {fringe_count:.2} fringes; need >= 1"
        )));
    }

    let slope = 2.0 * PI * amplitude / period;
    let sigma_s = match sigma_mode {
        SigmaMode::FromResiduals => fit.residual_rms,
        SigmaMode::AnalyticPoisson => {
            let mean_level = signal.iter().sum::<f64>() / signal.len() as f64;
            if !(mean_level > 0.0) {
                return Err(Error::invalid("signal mean must be > 0 for Poisson sigma"));
            }
            (mean_level / n_shots as f64).sqrt()
        }
        SigmaMode::Provided(s) => {
            if !(s > 0.0) {
                return Err(Error::invalid("provided sigma must be > 0"));
            }
            s
        }
    };
    let b_min = sigma_s / slope;
    let measurement_time_t = n_shots as f64 * two_tau;
    let eta_dc = b_min * measurement_time_t.sqrt();

    Ok(SensitivityReport {
        sigma_s,
        slope,
        b_min,
        measurement_time_t,
        eta_dc,
        fringe_count,
        fit,
    })
}

/// The raw multi-start sinusoid fit, also used by the control experiments
/// where the trace may be flat (no fringe-count precondition here).
pub fn fit_fringe_sinusoid(b_values: &[f64], signal: &[f64]) -> Result<FitResult> {
    if b_values.len() != signal.len() || b_values.len() < 8 {
        return Err(Error::InsufficientData(
            "sinusoid fit needs >= 8 matched points".into(),
        ));
    }
    let n = b_values.len();
    let mean = signal.iter().sum::<f64>() / n as f64;
    let var = signal.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / n as f64;
    let amp0 = (2.0 * var).sqrt().max(1e-12);
    let span = b_values[n - 1] - b_values[0];

    // period seed from the spectrum of the detrended signal over the sweep
    let step = span / (n as f64 - 1.0);
    let p_fft = match fft_spectrum(signal, step.abs(), FftWindow::Rectangular) {
        Ok(spec) => {
            let f = spec.peak_frequency();
            if f > 0.0 {
                1.0 / f
            } else {
                span.abs()
            }
        }
        Err(_) => span.abs(),
    };

    let periods = [p_fft, p_fft / (1.0 + 1.0 / (span.abs() / p_fft).max(1.0))];
    let phases = [0.0, PI / 2.0, PI, 3.0 * PI / 2.0];
    let mut best: Option<(f64, FitResult)> = None;
    for &p0 in &periods {
        for &phi0 in &phases {
            let init = [mean, amp0, p0, phi0];
            if let Ok(res) = fit::fit(&Sinusoid, b_values, signal, &init, &FitOptions::default()) {
                let score = res.residual_rms;
                if best.as_ref().is_none_or(|(s, _)| score < *s) {
                    best = Some((score, res));
                }
            }
        }
    }
    best.map(|(_, r)| r).ok_or(Error::InsufficientData(
        "no sinusoid initialization converged".into(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shot_noise_figure_reference() {
        // 0.9 MHz linewidth -> ~32.1 uT
        let b = shot_noise_dc_sensitivity(0.9e6).unwrap();
        assert!((b - 32.1e-6).abs() < 0.1e-6, "got {b:.4e}");
        assert_eq!(shot_noise_dc_sensitivity(0.0).unwrap(), 0.0);
        let b2 = shot_noise_dc_sensitivity(1.8e6).unwrap();
        assert!((b2 - 2.0 * b).abs() < 1e-18);
    }

    #[test]
    fn contrast_contract() {
        assert_eq!(contrast(1.0, 1.0).unwrap(), 0.0);
        assert_eq!(contrast(1.0, 0.0).unwrap(), 1.0);
        let c = contrast(0.7, 0.2).unwrap();
        let swapped = contrast(0.2, 0.7).unwrap();
        assert!((c + swapped).abs() < 1e-15);
        assert!(matches!(contrast(0.0, 0.0), Err(Error::UndefinedContrast)));
        assert!((-1.0..=1.0).contains(&c));
    }

    #[test]
    fn delta_b_reference() {
        let db = delta_b_per_fringe_half(10e-6, 2.8e10).unwrap();
        assert!((db - 3.571e-6).abs() < 1e-9, "got {db:.4e}");
        let db_half = delta_b_per_fringe_half(5e-6, 2.8e10).unwrap();
        assert!((db_half - 2.0 * db).abs() / db < 1e-12);
        let db_long = delta_b_per_fringe_half(1.0, 2.8e10).unwrap();
        assert!(db_long < 1e-9);
    }

    #[test]
    fn report_algebra_exact() {
        // noiseless sinusoid with injected sigma: b_min = sigma * P / (2 pi |c|)
        let p_true = 12e-6;
        let amp = 0.08;
        let base = 0.42;
        let bs: Vec<f64> = (0..100).map(|i| 160e-6 + i as f64 * 0.7e-6).collect();
        let ys: Vec<f64> = bs
            .iter()
            .map(|b| base + amp * (2.0 * PI * b / p_true + 0.3).cos())
            .collect();
        let sigma = 1.7e-3;
        let rep =
            magnetometer_sensitivity(&bs, &ys, 10e-6, 500_000, SigmaMode::Provided(sigma)).unwrap();
        let expected_bmin = sigma * p_true / (2.0 * PI * amp);
        assert!((rep.b_min - expected_bmin).abs() / expected_bmin < 1e-10);
        // eta = b_min sqrt(n * 2tau) exactly
        let t = 500_000.0 * 10e-6;
        assert!((rep.measurement_time_t - t).abs() < 1e-12);
        assert!((rep.eta_dc - rep.b_min * t.sqrt()).abs() <= f64::EPSILON * rep.eta_dc);
        // slope-noise algebra: b_min * slope = sigma_s
        assert!((rep.b_min * rep.slope - rep.sigma_s).abs() / rep.sigma_s < 1e-12);
        assert!((rep.fringe_count - (bs[99] - bs[0]) / p_true).abs() < 1e-3);
    }

    #[test]
    fn analytic_poisson_sigma_mode() {
        let period = 12e-6;
        let bs: Vec<f64> = (0..81).map(|i| 160e-6 + i as f64 * 0.8e-6).collect();
        let ys: Vec<f64> = bs
            .iter()
            .map(|b| 0.40 + 0.06 * (2.0 * PI * b / period).cos())
            .collect();
        let n = 250_000u64;
        let rep = magnetometer_sensitivity(&bs, &ys, 10e-6, n, SigmaMode::AnalyticPoisson).unwrap();
        let mean_level = ys.iter().sum::<f64>() / ys.len() as f64;
        let expected = (mean_level / n as f64).sqrt();
        assert!((rep.sigma_s - expected).abs() / expected < 1e-12);
    }

    #[test]
    fn sub_fringe_sweep_rejected() {
        let bs: Vec<f64> = (0..50).map(|i| i as f64 * 1e-7).collect();
        let ys: Vec<f64> = bs
            .iter()
            .map(|b| 0.4 + 0.05 * (2.0 * PI * b / 80e-6).cos())
            .collect();
        let err = magnetometer_sensitivity(&bs, &ys, 10e-6, 1000, SigmaMode::FromResiduals);
        assert!(matches!(err, Err(Error::InsufficientData(_))));
    }
}
