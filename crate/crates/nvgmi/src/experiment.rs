//! End-to-end experiment runner: simulate, analyze, and write artifacts
//! (trace CSV, report JSON, manifest) deterministically.

use crate::config::{ControlMode, ExperimentConfig, ExperimentKind};
use crate::error::{Error, Result};
use crate::estimation::{
    self, calibrate, contrast, delta_b_per_fringe_half, fft_spectrum_of_trace,
    magnetometer_sensitivity, noise_spectral_density, sensitivity::fit_fringe_sinusoid,
    shot_noise_dc_sensitivity, DecayKind, FftWindow, SigmaMode,
};
use crate::gmi;
use crate::presets;
use crate::rng::Stream;
use crate::sequence::{
    self, build_hahn, build_odmr, build_rabi, build_ramsey, build_sync_magnetometry, run, Models,
    RunContext, Trace,
};
use crate::widefield;
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};
use std::fs;
use std::path::{Path, PathBuf};

/// Auxiliary data-file format (traces are always CSV; reports always JSON).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Serialize)]
pub struct ManifestEntry {
    pub name: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub experiment: String,
    pub seed: u64,
    pub config_sha256: String,
    pub files: Vec<ManifestEntry>,
}

/// Collects output files and writes them plus the manifest at the end.
struct OutputSink {
    dir: PathBuf,
    entries: Vec<ManifestEntry>,
}

impl OutputSink {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(OutputSink {
            dir: dir.to_path_buf(),
            entries: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        fs::write(self.dir.join(name), bytes)?;
        self.entries.push(ManifestEntry {
            name: name.to_string(),
            sha256: hex::encode(Sha256::digest(bytes)),
        });
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| Error::invalid(format!("serialization failed: {e}")))?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    fn finish(mut self, config: &ExperimentConfig, config_text: &str) -> Result<Manifest> {
        let manifest = Manifest {
            tool: "nvgmi".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            experiment: config.kind.name().into(),
            seed: config.seed,
            config_sha256: hex::encode(Sha256::digest(config_text.as_bytes())),
            files: std::mem::take(&mut self.entries),
        };
        let mut text = serde_json::to_string_pretty(&manifest)
            .map_err(|e| Error::invalid(format!("serialization failed: {e}")))?;
        text.push('\n');
        fs::write(self.dir.join("manifest.json"), text.as_bytes())?;
        Ok(manifest)
    }
}

/// Trace CSV: sweep value, mean signal, per-point sigma. '.' decimal, '\n'
/// line endings, header mandatory.
fn trace_csv(trace: &Trace) -> String {
    let mut out = format!(
        "{},mean_signal_photons_per_shot,sigma_photons_per_shot\n",
        trace.sweep_variable.name()
    );
    for i in 0..trace.sweep_values.len() {
        out.push_str(&format!(
            "{:e},{:e},{:e}\n",
            trace.sweep_values[i], trace.mean_signal[i], trace.sigma[i]
        ));
    }
    out
}

fn models_from(config: &ExperimentConfig) -> Result<Models> {
    let mut models = presets::models(&config.nv_preset, &config.wire_preset)?;
    models.bias_b_parallel = config.bias_b_parallel;
    models.odmr_fwhm = config.odmr_fwhm;
    models.validate()?;
    Ok(models)
}

fn linspace(start: f64, stop: f64, points: usize) -> Vec<f64> {
    (0..points)
        .map(|i| start + (stop - start) * i as f64 / (points - 1) as f64)
        .collect()
}

/// Run one experiment end to end and write its artifacts under `out_dir`.
/// Returns the manifest. Rerunning with an identical config and seed
/// reproduces every output byte.
pub fn run_experiment(
    config: &ExperimentConfig,
    config_text: &str,
    out_dir: &Path,
    format: OutputFormat,
) -> Result<Manifest> {
    let mut sink = OutputSink::new(out_dir)?;
    let models = models_from(config)?;
    match config.kind {
        ExperimentKind::Odmr => run_odmr(config, &models, &mut sink)?,
        ExperimentKind::Rabi => run_rabi(config, &models, &mut sink)?,
        ExperimentKind::Ramsey => run_ramsey(config, &models, &mut sink)?,
        ExperimentKind::Hahn => run_hahn(config, &models, &mut sink)?,
        ExperimentKind::Magnetometry => run_magnetometry(config, &models, &mut sink)?,
        ExperimentKind::SweepFac => run_sweep_fac(config, &models, &mut sink)?,
        ExperimentKind::NoiseFloor => run_noise_floor(config, &models, &mut sink)?,
        ExperimentKind::Calibrate => run_calibrate(config, &models, &mut sink)?,
        ExperimentKind::Widefield => run_widefield(config, &models, &mut sink, format)?,
        ExperimentKind::GmiCurve => run_gmi_curve(config, &models, &mut sink, format)?,
    }
    sink.finish(config, config_text)
}

fn run_odmr(config: &ExperimentConfig, models: &Models, sink: &mut OutputSink) -> Result<()> {
    let (seq, plan) = build_odmr(
        config.odmr.f_start,
        config.odmr.f_stop,
        config.odmr.points,
        config.shots,
        config.seed,
        models,
    )?;
    let trace = run(&seq, &plan, models, RunContext::default())?;
    sink.write("trace.csv", trace_csv(&trace).as_bytes())?;

    // four dips when the Zeeman splitting resolves the pairs, two otherwise
    let zeeman = models.nv.gyro_e * models.bias_b_parallel.abs();
    let n_dips = if 2.0 * zeeman > 2.0 * models.odmr_fwhm {
        4
    } else {
        2
    };
    let fit = estimation::fit_lorentzian_multi(&trace.sweep_values, &trace.mean_signal, n_dips)?;
    let centers: Vec<f64> = (0..n_dips).map(|i| fit.params[1 + 3 * i]).collect();
    let b_parallel_est = if n_dips == 4 {
        ((centers[2] + centers[3]) / 2.0 - (centers[0] + centers[1]) / 2.0)
            / (2.0 * models.nv.gyro_e)
    } else {
        0.0
    };
    let report = json!({
        "experiment": "odmr",
        "fit": fit,
        "centers_hz": centers,
        "b_parallel_estimate_t": b_parallel_est,
        "trace_hash": trace.metadata.sequence_hash,
        "sync_tag": trace.metadata.sync_tag,
    });
    sink.write_json("report.json", &report)
}

fn run_rabi(config: &ExperimentConfig, models: &Models, sink: &mut OutputSink) -> Result<()> {
    let durations = linspace(0.0, config.rabi.t_max, config.rabi.points);
    // strictly monotone from zero; drop the duplicate origin if t_max tiny
    let (seq, plan) = build_rabi(durations, config.shots, config.seed, models)?;
    let trace = run(&seq, &plan, models, RunContext::default())?;
    sink.write("trace.csv", trace_csv(&trace).as_bytes())?;

    let mean = trace.mean_signal.iter().sum::<f64>() / trace.mean_signal.len() as f64;
    let amp0 = trace
        .mean_signal
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max)
        - mean;
    let init = [mean, amp0, models.nv.rabi_freq, 0.0];
    let fit = estimation::fit::fit(
        &estimation::fit::Cosine,
        &trace.sweep_values,
        &trace.mean_signal,
        &init,
        &estimation::FitOptions::default(),
    )?;
    let report = json!({
        "experiment": "rabi",
        "fit": fit,
        "rabi_frequency_hz": fit.params[2].abs(),
        "pi_pulse_duration_s": 0.5 / fit.params[2].abs(),
    });
    sink.write_json("report.json", &report)
}

fn run_ramsey(config: &ExperimentConfig, models: &Models, sink: &mut OutputSink) -> Result<()> {
    let taus: Vec<f64> = (1..=config.ramsey.points)
        .map(|i| config.ramsey.tau_max * i as f64 / config.ramsey.points as f64)
        .collect();
    let (seq, plan) = build_ramsey(
        taus,
        config.ramsey.detuning,
        config.shots,
        config.seed,
        models,
    )?;
    let trace = run(&seq, &plan, models, RunContext::default())?;
    sink.write("trace.csv", trace_csv(&trace).as_bytes())?;

    let envelope = estimation::fit_decay_envelope(
        &trace.sweep_values,
        &trace.mean_signal,
        Some(&trace.sigma),
        DecayKind::Exponential,
    )?;
    let spectrum = fft_spectrum_of_trace(
        &trace.sweep_values,
        &trace.mean_signal,
        FftWindow::Rectangular,
    )?;
    let peaks = spectrum.two_peak_frequencies();
    let separation = peaks.map(|(a, b)| (a - b).abs());
    let report = json!({
        "experiment": "ramsey",
        "envelope_fit": envelope,
        "t2_star_s": envelope.params[1].abs(),
        "fft_peaks_hz": peaks.map(|(a, b)| vec![a, b]),
        "hyperfine_separation_hz": separation,
        "fft_bin_width_hz": spectrum.bin_width,
    });
    sink.write_json("report.json", &report)
}

fn run_hahn(config: &ExperimentConfig, models: &Models, sink: &mut OutputSink) -> Result<()> {
    let two_taus: Vec<f64> = (1..=config.hahn.points)
        .map(|i| config.hahn.two_tau_max * i as f64 / config.hahn.points as f64)
        .collect();
    let (seq_a, plan_a) = build_hahn(two_taus.clone(), false, config.shots, config.seed, models)?;
    let (seq_b, plan_b) = build_hahn(two_taus, true, config.shots, config.seed + 1, models)?;
    let up = run(&seq_a, &plan_a, models, RunContext::default())?;
    let down = run(&seq_b, &plan_b, models, RunContext::default())?;
    sink.write("trace.csv", trace_csv(&up).as_bytes())?;
    sink.write("trace_phase180.csv", trace_csv(&down).as_bytes())?;

    let pair = estimation::fit_decay_hahn_pair(
        &up.sweep_values,
        &up.mean_signal,
        &down.mean_signal,
        DecayKind::Stretched(models.nv.stretch_p),
    )?;
    let report = json!({
        "experiment": "hahn",
        "t2_average_s": pair.t2_average,
        "fit_phase0": pair.fits[0],
        "fit_phase180": pair.fits[1],
        "stretch_p": models.nv.stretch_p,
    });
    sink.write_json("report.json", &report)
}

fn magnetometry_trace(
    config: &ExperimentConfig,
    models: &Models,
    control: ControlMode,
) -> Result<(Trace, f64)> {
    let m = &config.magnetometry;
    let b_values = linspace(m.b_start, m.b_stop, m.points);
    let (v_ac, phi, f_ac_override) = match control {
        ControlMode::Synchronized => (m.v_ac, m.phi_prime, m.f_ac_override),
        ControlMode::NoRf => (0.0, 0.0, None),
        ControlMode::AsyncFrequency => (m.v_ac, 0.0, Some(2.0 / m.two_tau)),
        ControlMode::AsyncPhase => (m.v_ac, std::f64::consts::PI / 2.0, None),
    };
    let (seq, plan) = build_sync_magnetometry(
        m.two_tau,
        v_ac,
        phi,
        f_ac_override,
        b_values,
        false,
        config.shots,
        config.seed,
        models,
    )?;
    let trace = run(&seq, &plan, models, RunContext::default())?;
    Ok((trace, m.two_tau))
}

fn run_magnetometry(
    config: &ExperimentConfig,
    models: &Models,
    sink: &mut OutputSink,
) -> Result<()> {
    let control = config.magnetometry.control;
    let (trace, two_tau) = magnetometry_trace(config, models, control)?;
    sink.write("trace.csv", trace_csv(&trace).as_bytes())?;

    let report = match control {
        ControlMode::Synchronized => {
            let sens = magnetometer_sensitivity(
                &trace.sweep_values,
                &trace.mean_signal,
                two_tau,
                config.shots,
                SigmaMode::FromResiduals,
            )?;
            // reference figures alongside the run
            let ramsey_figure = shot_noise_dc_sensitivity(config.odmr_fwhm)?;
            let delta_b = delta_b_per_fringe_half(two_tau, models.nv.gyro_e)?;
            json!({
                "experiment": "magnetometry",
                "control": control.name(),
                "sensitivity": sens,
                "ramsey_shot_noise_figure_t": ramsey_figure,
                "delta_b_per_fringe_half_t": delta_b,
                "improvement_ratio": ramsey_figure / sens.eta_dc,
                "sync_tag": trace.metadata.sync_tag,
            })
        }
        _ => {
            // control runs: report residual fringe amplitude vs shot noise
            let fit = fit_fringe_sinusoid(&trace.sweep_values, &trace.mean_signal)?;
            let sigma_mean = trace.sigma.iter().sum::<f64>() / trace.sigma.len() as f64;
            json!({
                "experiment": "magnetometry",
                "control": control.name(),
                "fitted_amplitude_photons": fit.params[1].abs(),
                "per_point_sigma_photons": sigma_mean,
                "amplitude_over_sigma": fit.params[1].abs() / sigma_mean,
                "sync_tag": trace.metadata.sync_tag,
            })
        }
    };
    sink.write_json("report.json", &report)
}

fn run_sweep_fac(config: &ExperimentConfig, models: &Models, sink: &mut OutputSink) -> Result<()> {
    let mut rows = Vec::new();
    for (i, &two_tau) in config.sweep_fac.two_tau_values.iter().enumerate() {
        let mut sub = config.clone();
        sub.magnetometry.two_tau = two_tau;
        sub.seed = config.seed.wrapping_add(i as u64);
        let (trace, _) = magnetometry_trace(&sub, models, ControlMode::Synchronized)?;
        sink.write(
            &format!("trace_two_tau_{i}.csv"),
            trace_csv(&trace).as_bytes(),
        )?;
        let sens = magnetometer_sensitivity(
            &trace.sweep_values,
            &trace.mean_signal,
            two_tau,
            config.shots,
            SigmaMode::FromResiduals,
        )?;
        rows.push(json!({
            "two_tau_s": two_tau,
            "f_ac_hz": 1.0 / two_tau,
            "fringe_count": sens.fringe_count,
            "fringe_amplitude_photons": sens.fit.params[1].abs(),
            "eta_dc_t_per_sqrt_hz": sens.eta_dc,
        }));
    }
    let report = json!({
        "experiment": "sweep-fac",
        "runs": rows,
    });
    sink.write_json("report.json", &report)
}

fn run_noise_floor(
    config: &ExperimentConfig,
    models: &Models,
    sink: &mut OutputSink,
) -> Result<()> {
    let nf = &config.noise_floor;
    let m = &config.magnetometry;
    let samples = (nf.duration * nf.sampling_rate).round() as usize;

    // shots of the echo protocol that fit into one sample interval
    let shot_time = sequence::LASER_INIT_DURATION + m.two_tau + sequence::READOUT_DURATION;
    let reps_per_sample = ((1.0 / nf.sampling_rate) / shot_time).floor().max(1.0) as u64;

    // test field: configured, or the point of maximum fringe displacement
    // between the two readout phases inside the magnetometry window
    let b_test = match nf.b_test {
        Some(b) => b,
        None => {
            let mut best = (m.b_start, 0.0);
            for candidate in linspace(m.b_start, m.b_stop, 101) {
                let l0 = echo_readout_mean(models, m.two_tau, m.v_ac, candidate, false)?;
                let lp = echo_readout_mean(models, m.two_tau, m.v_ac, candidate, true)?;
                let swing = (l0 - lp).abs();
                if swing > best.1 {
                    best = (candidate, swing);
                }
            }
            best.0
        }
    };

    // per-shot means of the two phase variants at the test field
    let lambda_0 = echo_readout_mean(models, m.two_tau, m.v_ac, b_test, false)?;
    let lambda_pi = echo_readout_mean(models, m.two_tau, m.v_ac, b_test, true)?;

    // SI-style contrast: standard deviations of the two phase datasets
    let mut stream = Stream::substream(config.seed, 0);
    let n_contrast = 256;
    let std_of = |stream: &mut Stream, lambda: f64| -> f64 {
        let draws: Vec<f64> = (0..n_contrast)
            .map(|_| stream.poisson(lambda * reps_per_sample as f64) as f64)
            .collect();
        let mean = draws.iter().sum::<f64>() / n_contrast as f64;
        (draws.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n_contrast as f64 - 1.0))
            .sqrt()
    };
    let m1 = std_of(&mut stream, lambda_0);
    let m2 = std_of(&mut stream, lambda_pi);
    let delta_m = contrast(m1, m2)?;
    let delta_b = delta_b_per_fringe_half(m.two_tau, models.nv.gyro_e)?;
    let mean_counts = lambda_0 * reps_per_sample as f64;
    // counts-per-sample per Tesla
    let slope = (delta_m / delta_b).abs() * mean_counts;
    if !(slope > 0.0) {
        return Err(Error::invalid("noise-floor slope collapsed to zero"));
    }

    // sensitive trace: echo protocol at the test field
    let mut sens_stream = Stream::substream(config.seed, 1);
    let sensitive: Vec<f64> = (0..samples)
        .map(|_| sens_stream.poisson(mean_counts) as f64)
        .collect();
    // background trace: all sources off, ambient leak only
    let mut bg_stream = Stream::substream(config.seed, 2);
    let ambient = nf.ambient_fraction * mean_counts;
    let background: Vec<f64> = (0..samples)
        .map(|_| bg_stream.poisson(ambient) as f64)
        .collect();

    let sens_spectrum = noise_spectral_density(&sensitive, nf.sampling_rate, slope)?;
    let bg_spectrum = noise_spectral_density(&background, nf.sampling_rate, slope)?;

    let mut csv = String::from("frequency_hz,sensitive_t_per_sqrt_hz,background_t_per_sqrt_hz\n");
    for i in 0..sens_spectrum.frequencies.len() {
        csv.push_str(&format!(
            "{:e},{:e},{:e}\n",
            sens_spectrum.frequencies[i], sens_spectrum.density[i], bg_spectrum.density[i]
        ));
    }
    sink.write("spectrum.csv", csv.as_bytes())?;

    // theoretical wire-limited floor for comparison
    let intrinsic = gmi::intrinsic_noise(&models.wire, &models.noise)?;

    let report = json!({
        "experiment": "noise-floor",
        "b_test_t": b_test,
        "contrast_delta_m": delta_m,
        "delta_b_t": delta_b,
        "slope_counts_per_t": slope,
        "reps_per_sample": reps_per_sample,
        "mean_counts_per_sample": mean_counts,
        "sensitive_floor_t_per_sqrt_hz": sens_spectrum.mean_floor,
        "background_floor_t_per_sqrt_hz": bg_spectrum.mean_floor,
        "intrinsic_wire_floor_t_per_sqrt_hz": intrinsic,
        "band_hz": sens_spectrum.band,
    });
    sink.write_json("report.json", &report)
}

/// Analytic readout mean of one synchronized echo shot at a fixed field.
fn echo_readout_mean(
    models: &Models,
    two_tau: f64,
    v_ac: f64,
    b_dc: f64,
    flip_phase: bool,
) -> Result<f64> {
    let (seq, mut plan) = build_sync_magnetometry(
        two_tau,
        v_ac,
        0.0,
        None,
        vec![b_dc],
        flip_phase,
        1,
        0,
        models,
    )?;
    plan.noiseless = true;
    let trace = run(&seq, &plan, models, RunContext::default())?;
    Ok(trace.mean_signal[0])
}

fn run_calibrate(config: &ExperimentConfig, models: &Models, sink: &mut OutputSink) -> Result<()> {
    let c = &config.calibrate;
    let currents = linspace(c.i_start, c.i_stop, c.points);

    // synthetic coil map on top of the static bias; ODMR per current point
    let mut traces = Vec::with_capacity(currents.len());
    for (i, &current) in currents.iter().enumerate() {
        let b_coil = calibrate::synthetic_coil_field(
            current,
            c.cal_t_per_a,
            c.i_lin,
            calibrate::DEFAULT_SAT_DROP,
            calibrate::DEFAULT_TAIL_SLOPE_FRAC,
        );
        let mut m = models.clone();
        m.bias_b_parallel = config.bias_b_parallel + b_coil;
        let span = 2.2 * models.nv.gyro_e * m.bias_b_parallel.abs() + 12.0 * models.odmr_fwhm;
        let (seq, plan) = build_odmr(
            models.nv.zero_field_splitting_d - span / 2.0,
            models.nv.zero_field_splitting_d + span / 2.0,
            config.odmr.points,
            config.shots,
            config.seed.wrapping_add(i as u64),
            &m,
        )?;
        let trace = run(&seq, &plan, &m, RunContext::default())?;
        traces.push((trace.sweep_values, trace.mean_signal));
    }

    let result = calibrate::calibrate_coil(&currents, &traces, &models.nv)?;

    let mut csv = String::from("current_a,b_extracted_t,in_window\n");
    for (i, (&cur, &b)) in currents.iter().zip(&result.b_values).enumerate() {
        let inside = i >= result.window_start && i < result.window_start + result.window_len;
        csv.push_str(&format!("{cur:e},{b:e},{}\n", if inside { 1 } else { 0 }));
    }
    sink.write("b_vs_i.csv", csv.as_bytes())?;

    let report = json!({
        "experiment": "calibrate",
        "slope_t_per_a": result.slope_t_per_a,
        "true_slope_t_per_a": c.cal_t_per_a,
        "window_start_index": result.window_start,
        "window_points": result.window_len,
        "window_i_start_a": currents[result.window_start],
        "window_i_stop_a": currents[result.window_start + result.window_len - 1],
        "residual_rms_t": result.residual_rms,
    });
    sink.write_json("report.json", &report)
}

fn run_widefield(
    config: &ExperimentConfig,
    models: &Models,
    sink: &mut OutputSink,
    format: OutputFormat,
) -> Result<()> {
    let mut chain = presets::default_domain_chain(&models.wire);
    for d in chain.dipoles.iter_mut() {
        for c in d.moment.iter_mut() {
            *c *= config.widefield.moment_scale;
        }
    }
    chain.validate(&models.wire)?;

    let (mut sites, grid) = presets::default_widefield_sites(&models.wire);
    widefield::forward_map(&chain, &mut sites, &models.nv)?;
    let map = widefield::reconstruct(&sites, &grid, &models.nv)?;

    match format {
        OutputFormat::Csv => {
            sink.write("field_map.csv", widefield::field_map_csv(&map).as_bytes())?;
        }
        OutputFormat::Json => {
            sink.write_json("field_map.json", &map)?;
        }
    }

    // ground truth is available here; report the round-trip quality
    let mut max_rel_err: f64 = 0.0;
    let mut invalid = 0usize;
    for cell in &map.cells {
        if !cell.valid {
            invalid += 1;
            continue;
        }
        let truth = gmi::stray_field(&chain, [cell.x, cell.y, 0.0])?;
        let mag = (truth.iter().map(|v| v * v).sum::<f64>()).sqrt();
        // reconstruction is sign-gauged; compare against the closer of +-truth
        let err_plus: f64 = (0..3)
            .map(|i| (cell.b[i] - truth[i]).powi(2))
            .sum::<f64>()
            .sqrt();
        let err_minus: f64 = (0..3)
            .map(|i| (cell.b[i] + truth[i]).powi(2))
            .sum::<f64>()
            .sqrt();
        max_rel_err = max_rel_err.max(err_plus.min(err_minus) / mag);
    }
    let report = json!({
        "experiment": "widefield",
        "cells": map.cells.len(),
        "invalid_cells": invalid,
        "max_relative_roundtrip_error": max_rel_err,
        "sites": sites.len(),
    });
    sink.write_json("report.json", &report)
}

fn run_gmi_curve(
    config: &ExperimentConfig,
    models: &Models,
    sink: &mut OutputSink,
    format: OutputFormat,
) -> Result<()> {
    let g = &config.gmi_curve;
    let mut rows = Vec::new();
    for i in 0..g.f_points {
        // logarithmic frequency grid
        let f = g.f_start * (g.f_stop / g.f_start).powf(i as f64 / (g.f_points - 1) as f64);
        for j in 0..g.h_points {
            let h = g.h_max * j as f64 / (g.h_points - 1) as f64;
            let mu = gmi::permeability(&models.wire, h)?;
            let delta = gmi::skin_depth(f, mu, models.wire.resistivity_rho)?;
            let z = gmi::impedance(&models.wire, f, h)?;
            let ratio = gmi::gmi_ratio(&models.wire, f, h)?;
            rows.push((f, h, mu, delta, z.re, z.im, z.norm(), ratio));
        }
    }
    match format {
        OutputFormat::Csv => {
            let mut csv = String::from(
                "f_hz,h_a_per_m,mu_r,skin_depth_m,z_re_ohm,z_im_ohm,z_abs_ohm,gmi_ratio_percent\n",
            );
            for r in &rows {
                csv.push_str(&format!(
                    "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}\n",
                    r.0, r.1, r.2, r.3, r.4, r.5, r.6, r.7
                ));
            }
            sink.write("gmi_curve.csv", csv.as_bytes())?;
        }
        OutputFormat::Json => {
            let json_rows: Vec<_> = rows
                .iter()
                .map(|r| {
                    json!({
                        "f_hz": r.0, "h_a_per_m": r.1, "mu_r": r.2, "skin_depth_m": r.3,
                        "z_re_ohm": r.4, "z_im_ohm": r.5, "z_abs_ohm": r.6,
                        "gmi_ratio_percent": r.7,
                    })
                })
                .collect();
            sink.write_json("gmi_curve.json", &json_rows)?;
        }
    }

    let peak = rows.iter().map(|r| r.7).fold(f64::NEG_INFINITY, f64::max);
    let report = json!({
        "experiment": "gmi-curve",
        "grid_points": rows.len(),
        "peak_gmi_ratio_percent": peak,
    });
    sink.write_json("report.json", &report)
}

/// Noiseless mean of one synchronized echo shot at a fixed field; used by
/// integration tests to pin expected fringe levels.
pub fn echo_shot_mean(models: &Models, two_tau: f64, v_ac: f64, b_dc: f64) -> Result<f64> {
    echo_readout_mean(models, two_tau, v_ac, b_dc, false)
}
