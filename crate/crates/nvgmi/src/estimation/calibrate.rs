//! Coil calibration from per-current ODMR spectra: extract the field at the
//! NV for every coil current through the Zeeman relation, then find the most
//! linear window and report Tesla-per-ampere over it.

use crate::error::{Error, Result};
use crate::estimation::fit::linear_fit;
use crate::estimation::fit_lorentzian_multi;
use crate::spin::NvParams;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoilCalibration {
    /// Calibration slope over the selected window, T/A.
    pub slope_t_per_a: f64,
    /// First index of the selected window.
    pub window_start: usize,
    /// Number of points in the window.
    pub window_len: usize,
    /// Extracted field per current point, T.
    pub b_values: Vec<f64>,
    /// Linear-fit residual RMS inside the window, T.
    pub residual_rms: f64,
}

/// Extract |B_par| per current point from four-dip ODMR fits:
/// B = (upper pair centroid - lower pair centroid) / (2 gamma_e).
pub fn extract_field_vs_current(
    traces: &[(Vec<f64>, Vec<f64>)],
    params: &NvParams,
) -> Result<Vec<f64>> {
    traces
        .iter()
        .map(|(freqs, signal)| {
            let fit = fit_lorentzian_multi(freqs, signal, 4)?;
            let c = &fit.params;
            // centers are sorted by fit_lorentzian_multi
            let lower = (c[1] + c[4]) / 2.0;
            let upper = (c[7] + c[10]) / 2.0;
            Ok((upper - lower) / (2.0 * params.gyro_e))
        })
        .collect()
}

/// Minimum number of points a calibration window must contain.
pub const MIN_WINDOW_POINTS: usize = 5;

/// Fraction of the window's field span the linear-fit residual RMS must stay
/// below for the window to qualify.
pub const WINDOW_RESIDUAL_FRACTION: f64 = 0.01;

/// Longest contiguous window whose linear-fit residual RMS is below 1% of the
/// window's field span; earliest window wins ties. Returns
/// (start, len, slope, residual_rms).
pub fn find_linear_window(currents: &[f64], b_values: &[f64]) -> Result<(usize, usize, f64, f64)> {
    let n = currents.len();
    if n != b_values.len() || n < MIN_WINDOW_POINTS {
        return Err(Error::CalibrationFailure(format!(
            "need >= {MIN_WINDOW_POINTS} matched points, got {n}"
        )));
    }
    let mut best: Option<(usize, usize, f64, f64)> = None;
    for start in 0..=(n - MIN_WINDOW_POINTS) {
        for end in (start + MIN_WINDOW_POINTS)..=n {
            let xs = &currents[start..end];
            let ys = &b_values[start..end];
            let span = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                - ys.iter().cloned().fold(f64::INFINITY, f64::min);
            if !(span > 0.0) {
                continue;
            }
            let Ok((a, b)) = linear_fit(xs, ys) else {
                continue;
            };
            let rms = (xs
                .iter()
                .zip(ys)
                .map(|(x, y)| {
                    let r = y - (a + b * x);
                    r * r
                })
                .sum::<f64>()
                / xs.len() as f64)
                .sqrt();
            if rms < WINDOW_RESIDUAL_FRACTION * span {
                let len = end - start;
                let better = match &best {
                    None => true,
                    Some((bs, bl, _, _)) => len > *bl || (len == *bl && start < *bs),
                };
                if better {
                    best = Some((start, len, b, rms));
                }
            }
        }
    }
    best.ok_or_else(|| {
        Error::CalibrationFailure("no contiguous window meets the 1%-of-span residual bound".into())
    })
}

/// Full calibration: ODMR fits, Zeeman extraction, window search.
pub fn calibrate_coil(
    currents: &[f64],
    traces: &[(Vec<f64>, Vec<f64>)],
    params: &NvParams,
) -> Result<CoilCalibration> {
    if currents.len() != traces.len() {
        return Err(Error::invalid("one ODMR trace per current point required"));
    }
    let b_values = extract_field_vs_current(traces, params)?;
    let (window_start, window_len, slope_t_per_a, residual_rms) =
        find_linear_window(currents, &b_values)?;
    Ok(CoilCalibration {
        slope_t_per_a,
        window_start,
        window_len,
        b_values,
        residual_rms,
    })
}

/// Synthetic coil field map for the calibrate experiment: exactly linear out
/// to `i_lin`, then a saturated tail. At the knee the extracted field drops by
/// `sat_drop` (the dip-assignment scale A / (2 gamma_e): once the outer
/// hyperfine pair leaves tracking, the apparent splitting relaxes by one
/// hyperfine spacing) and continues with a small residual slope.
pub fn synthetic_coil_field(
    i_amps: f64,
    cal_t_per_a: f64,
    i_lin: f64,
    sat_drop: f64,
    tail_slope_frac: f64,
) -> f64 {
    let mag = i_amps.abs();
    if mag <= i_lin {
        cal_t_per_a * i_amps
    } else {
        i_amps.signum()
            * (cal_t_per_a * i_lin - sat_drop + tail_slope_frac * cal_t_per_a * (mag - i_lin))
    }
}

/// Default saturation drop of the synthetic map: one hyperfine reassignment,
/// A / (2 gamma_e) with A = 3 MHz.
pub const DEFAULT_SAT_DROP: f64 = 3.0e6 / (2.0 * 2.8e10);

/// Default residual slope fraction of the saturated tail.
pub const DEFAULT_TAIL_SLOPE_FRAC: f64 = 0.05;
