//! Acceptance suite: one test per release criterion, each printing a
//! PASS line when it holds. Run with `cargo test --test acceptance`.

use num_complex::Complex64;
use nvgmi::config::{parse_config, ExperimentKind};
use nvgmi::error::Error;
use nvgmi::estimation::{
    self, calibrate, delta_b_per_fringe_half, fft_spectrum_of_trace, magnetometer_sensitivity,
    noise_spectral_density, sensitivity::fit_fringe_sinusoid, shot_noise_dc_sensitivity, DecayKind,
    FftWindow, SigmaMode,
};
use nvgmi::experiment::{run_experiment, OutputFormat};
use nvgmi::gmi;
use nvgmi::presets;
use nvgmi::rng::Stream;
use nvgmi::sequence::{
    build_hahn, build_odmr, build_ramsey, build_sync_magnetometry, run, Models, RunContext,
};
use nvgmi::widefield;
use std::f64::consts::PI;
use std::time::Instant;

fn models() -> Models {
    presets::models("paper-nv", "plated+annealed").unwrap()
}

fn ok(name: &str) {
    println!("ACCEPTANCE {name}: PASS");
}

// 1. Zeeman/ODMR: simulated ODMR at B_par = 0.5 mT, fitted pair centroids at
// 2870 +- 14 MHz with 3.0 +- 0.1 MHz hyperfine sub-splitting. Runtime < 5 s.
#[test]
fn criterion_01_zeeman_odmr() {
    let start = Instant::now();
    let m = models();
    let (seq, plan) = build_odmr(2.845e9, 2.895e9, 501, 50_000, 1001, &m).unwrap();
    let trace = run(&seq, &plan, &m, RunContext::default()).unwrap();
    let fit = estimation::fit_lorentzian_multi(&trace.sweep_values, &trace.mean_signal, 4).unwrap();
    let c: Vec<f64> = (0..4).map(|i| fit.params[1 + 3 * i]).collect();

    let lower_centroid = (c[0] + c[1]) / 2.0;
    let upper_centroid = (c[2] + c[3]) / 2.0;
    let zeeman = m.nv.gyro_e * 0.5e-3;
    assert!(
        (lower_centroid - (2.870e9 - zeeman)).abs() < 0.5e6,
        "lower centroid {lower_centroid:.4e}"
    );
    assert!(
        (upper_centroid - (2.870e9 + zeeman)).abs() < 0.5e6,
        "upper centroid {upper_centroid:.4e}"
    );
    for (a, b) in [(c[0], c[1]), (c[2], c[3])] {
        let sub = b - a;
        assert!(
            (sub - 3.0e6).abs() < 0.1e6,
            "hyperfine sub-splitting {sub:.4e}"
        );
    }
    let dt = start.elapsed().as_secs_f64();
    assert!(dt < 5.0, "took {dt:.2} s");
    ok("01 zeeman-odmr");
}

// 2. Coherence round-trips: configured T2* = 0.69 us and T2 = 21 us (p = 2)
// recovered by the decay fits within 5% on 200-point traces with 1e4
// shots/point. Runtime < 10 s.
#[test]
fn criterion_02_coherence_roundtrips() {
    let start = Instant::now();
    let m = models();

    // Ramsey at zero detuning with degenerate nuclear branches: the trace is
    // a pure T2* decay and the decay fit applies directly
    let mut m_plain = m.clone();
    m_plain.nv.hyperfine_a = 0.0;
    let taus: Vec<f64> = (1..=200).map(|i| i as f64 * (3.5e-6 / 200.0)).collect();
    let (seq, plan) = build_ramsey(taus, 0.0, 10_000, 2002, &m_plain).unwrap();
    let trace = run(&seq, &plan, &m_plain, RunContext::default()).unwrap();
    let fit = estimation::fit_decay(
        &trace.sweep_values,
        &trace.mean_signal,
        DecayKind::Exponential,
    )
    .unwrap();
    let t2_star = fit.params[2].abs();
    assert!(
        (t2_star - 0.69e-6).abs() / 0.69e-6 < 0.05,
        "T2* {t2_star:.4e}"
    );

    // Hahn pair: 200 points out to 60 us
    let two_taus: Vec<f64> = (1..=200).map(|i| i as f64 * (60e-6 / 200.0)).collect();
    let (sa, pa) = build_hahn(two_taus.clone(), false, 10_000, 2003, &m).unwrap();
    let (sb, pb) = build_hahn(two_taus, true, 10_000, 2004, &m).unwrap();
    let up = run(&sa, &pa, &m, RunContext::default()).unwrap();
    let down = run(&sb, &pb, &m, RunContext::default()).unwrap();
    let pair = estimation::fit_decay_hahn_pair(
        &up.sweep_values,
        &up.mean_signal,
        &down.mean_signal,
        DecayKind::Stretched(2.0),
    )
    .unwrap();
    assert!(
        (pair.t2_average - 21e-6).abs() / 21e-6 < 0.05,
        "T2 {:.4e}",
        pair.t2_average
    );
    let dt = start.elapsed().as_secs_f64();
    assert!(dt < 10.0, "took {dt:.2} s");
    ok("02 coherence-roundtrips");
}

// 3. Ramsey FFT: hyperfine peak separation 3.0 MHz +- 1 bin on a 4 us,
// 2 ns-sampled trace. Runtime < 2 s.
#[test]
fn criterion_03_ramsey_fft() {
    let start = Instant::now();
    let m = models();
    let taus: Vec<f64> = (1..=2000).map(|i| i as f64 * 2e-9).collect();
    let (seq, plan) = build_ramsey(taus, 6.0e6, 20_000, 3003, &m).unwrap();
    let trace = run(&seq, &plan, &m, RunContext::default()).unwrap();
    let spec = fft_spectrum_of_trace(
        &trace.sweep_values,
        &trace.mean_signal,
        FftWindow::Rectangular,
    )
    .unwrap();
    let (f1, f2) = spec.two_peak_frequencies().unwrap();
    let separation = (f1 - f2).abs();
    assert!(
        (separation - 3.0e6).abs() <= spec.bin_width,
        "separation {separation:.4e}, bin {:.4e}",
        spec.bin_width
    );
    let dt = start.elapsed().as_secs_f64();
    assert!(dt < 2.0, "took {dt:.2} s");
    ok("03 ramsey-fft");
}

// 4. Shot-noise DC figure: 0.9 MHz linewidth -> 32.1 uT +- 0.1 uT.
#[test]
fn criterion_04_shot_noise_figure() {
    let b = shot_noise_dc_sensitivity(0.9e6).unwrap();
    assert!((b - 32.1e-6).abs() < 0.1e-6, "got {b:.5e}");
    ok("04 shot-noise-figure");
}

// 5. Magnetometry pipeline algebra: on a synthetic sinusoid with injected
// sigma, b_min = sigma * P / (2 pi |c|) to 1e-10 relative and
// eta_dc = b_min * sqrt(n * 2tau) exactly.
#[test]
fn criterion_05_pipeline_algebra() {
    let period = 11.9e-6;
    let amp = 0.063;
    let bs: Vec<f64> = (0..81)
        .map(|i| 163e-6 + i as f64 * (67e-6 / 80.0))
        .collect();
    let ys: Vec<f64> = bs
        .iter()
        .map(|b| 0.40 + amp * (2.0 * PI * b / period + 0.7).cos())
        .collect();
    let sigma = 8.9e-4;
    let n = 500_000u64;
    let two_tau = 10e-6;
    let rep = magnetometer_sensitivity(&bs, &ys, two_tau, n, SigmaMode::Provided(sigma)).unwrap();

    let expected_bmin = sigma * period / (2.0 * PI * amp);
    assert!(
        (rep.b_min - expected_bmin).abs() / expected_bmin < 1e-10,
        "b_min {:.6e} vs {expected_bmin:.6e}",
        rep.b_min
    );
    let t = n as f64 * two_tau;
    assert!((rep.measurement_time_t - t).abs() == 0.0);
    assert!((rep.eta_dc - rep.b_min * t.sqrt()).abs() <= f64::EPSILON * rep.eta_dc);
    assert!((rep.b_min * rep.slope - rep.sigma_s).abs() / rep.sigma_s < 1e-12);
    ok("05 pipeline-algebra");
}

// 6. Paper operating point: default presets, 2tau = 10 us, v_ac = 1 V,
// n = 500,000 (t = 5 s): eta_dc within a factor of 2 of 62.5 nT/sqrt(Hz)
// and >= 100x improvement over the Ramsey shot-noise figure. Runtime < 60 s.
#[test]
fn criterion_06_operating_point() {
    let start = Instant::now();
    let m = models();
    let op = presets::operating_point();
    let bs: Vec<f64> = (0..op.points)
        .map(|i| op.b_start + (op.b_stop - op.b_start) * i as f64 / (op.points - 1) as f64)
        .collect();
    let (seq, plan) = build_sync_magnetometry(
        op.two_tau, op.v_ac, 0.0, None, bs, false, op.shots, 6006, &m,
    )
    .unwrap();
    let trace = run(&seq, &plan, &m, RunContext::default()).unwrap();
    let rep = magnetometer_sensitivity(
        &trace.sweep_values,
        &trace.mean_signal,
        op.two_tau,
        op.shots,
        SigmaMode::FromResiduals,
    )
    .unwrap();

    assert!((rep.measurement_time_t - 5.0).abs() < 1e-12, "t = n * 2tau");
    let target = 62.5e-9;
    assert!(
        rep.eta_dc > target / 2.0 && rep.eta_dc < target * 2.0,
        "eta_dc {:.3e} not within 2x of {target:.3e}",
        rep.eta_dc
    );
    let ramsey_figure = shot_noise_dc_sensitivity(0.9e6).unwrap();
    let improvement = ramsey_figure / rep.eta_dc;
    assert!(improvement >= 100.0, "improvement {improvement:.1}x");
    let dt = start.elapsed().as_secs_f64();
    assert!(dt < 60.0, "took {dt:.2} s");
    println!(
        "  eta_dc = {:.1} nT/sqrt(Hz), improvement = {improvement:.0}x",
        rep.eta_dc * 1e9
    );
    ok("06 operating-point");
}

// 7. Controls: no-RF, async-frequency, and async-phase runs have fitted
// fringe amplitude < 3x the per-point shot-noise sigma; the synchronized run
// shows >= 5 fringes with sine-fit residual RMS < 10% of amplitude.
// Runtime < 60 s total.
#[test]
fn criterion_07_controls() {
    let start = Instant::now();
    let m = models();
    let op = presets::operating_point();
    let bs: Vec<f64> = (0..op.points)
        .map(|i| op.b_start + (op.b_stop - op.b_start) * i as f64 / (op.points - 1) as f64)
        .collect();

    // synchronized
    let (seq, plan) = build_sync_magnetometry(
        op.two_tau,
        op.v_ac,
        0.0,
        None,
        bs.clone(),
        false,
        op.shots,
        7007,
        &m,
    )
    .unwrap();
    let sync_trace = run(&seq, &plan, &m, RunContext::default()).unwrap();
    let rep = magnetometer_sensitivity(
        &sync_trace.sweep_values,
        &sync_trace.mean_signal,
        op.two_tau,
        op.shots,
        SigmaMode::FromResiduals,
    )
    .unwrap();
    assert!(
        rep.fringe_count >= 5.0,
        "only {:.2} fringes",
        rep.fringe_count
    );
    let residual_frac = rep.fit.residual_rms / rep.fit.params[1].abs();
    assert!(
        residual_frac < 0.10,
        "residual {residual_frac:.3} of amplitude"
    );

    // the three null controls
    let controls: [(&str, f64, f64, Option<f64>); 3] = [
        ("no_rf", 0.0, 0.0, None),
        ("async_frequency", op.v_ac, 0.0, Some(2.0 / op.two_tau)),
        ("async_phase", op.v_ac, PI / 2.0, None),
    ];
    for (i, (name, v, phi, f_override)) in controls.iter().enumerate() {
        let (seq, plan) = build_sync_magnetometry(
            op.two_tau,
            *v,
            *phi,
            *f_override,
            bs.clone(),
            false,
            op.shots,
            7100 + i as u64,
            &m,
        )
        .unwrap();
        let trace = run(&seq, &plan, &m, RunContext::default()).unwrap();
        let fit = fit_fringe_sinusoid(&trace.sweep_values, &trace.mean_signal).unwrap();
        let sigma_mean = trace.sigma.iter().sum::<f64>() / trace.sigma.len() as f64;
        let amplitude = fit.params[1].abs();
        assert!(
            amplitude < 3.0 * sigma_mean,
            "{name}: amplitude {amplitude:.3e} vs sigma {sigma_mean:.3e}"
        );
    }
    let dt = start.elapsed().as_secs_f64();
    assert!(dt < 60.0, "took {dt:.2} s");
    ok("07 controls");
}

// 8. Linearity: fringe count vs v_ac over {0.2 .. 1.0} V fits a line
// through the origin with R^2 > 0.99.
#[test]
fn criterion_08_fringe_linearity() {
    let m = models();
    let op = presets::operating_point();
    let bs: Vec<f64> = (0..op.points)
        .map(|i| op.b_start + (op.b_stop - op.b_start) * i as f64 / (op.points - 1) as f64)
        .collect();
    let v_values = [0.2, 0.4, 0.6, 0.8, 1.0];
    let mut fringe_counts = Vec::new();
    for (i, &v) in v_values.iter().enumerate() {
        let (seq, plan) = build_sync_magnetometry(
            op.two_tau,
            v,
            0.0,
            None,
            bs.clone(),
            false,
            100_000,
            8000 + i as u64,
            &m,
        )
        .unwrap();
        let trace = run(&seq, &plan, &m, RunContext::default()).unwrap();
        let rep = magnetometer_sensitivity(
            &trace.sweep_values,
            &trace.mean_signal,
            op.two_tau,
            100_000,
            SigmaMode::FromResiduals,
        )
        .unwrap();
        fringe_counts.push(rep.fringe_count);
    }
    let (slope, r2) =
        estimation::fit::linear_fit_through_origin(&v_values, &fringe_counts).unwrap();
    assert!(r2 > 0.99, "R^2 = {r2:.5}");
    assert!(slope > 0.0);
    println!("  fringes/V = {slope:.2}, R^2 = {r2:.5}");
    ok("08 fringe-linearity");
}

// 9. GMI physics: skin depth matches direct evaluation to 1e-12 on a
// 100-point grid; impedance matches the independent series oracle to 1e-8
// for |k a| < 10; DC limit |Z - r_dc|/r_dc < 1e-3 at a/delta < 0.05.
#[test]
fn criterion_09_gmi_physics() {
    let wire = presets::wire_params("paper-wire").unwrap();

    // skin-depth grid against the closed form
    for i in 0..100 {
        let f = 1e4 * 10f64.powf(i as f64 / 33.0);
        let mu = 1.0 + (wire.mu_max - 1.0) * i as f64 / 99.0;
        let got = gmi::skin_depth(f, mu, wire.resistivity_rho).unwrap();
        let direct =
            (2.0 * wire.resistivity_rho / (2.0 * PI * f * mu * nvgmi::constants::MU_0)).sqrt();
        assert!(
            ((got - direct) / direct).abs() < 1e-12,
            "f {f:.3e}, mu {mu:.1}"
        );
    }

    // impedance vs 50-term power series for |k a| < 10
    let series_j0_j1 = |z: Complex64| -> (Complex64, Complex64) {
        let q = z * z / 4.0;
        let mut j0 = Complex64::new(0.0, 0.0);
        let mut j1 = Complex64::new(0.0, 0.0);
        let mut term = Complex64::new(1.0, 0.0);
        for k in 0..50 {
            j0 += term;
            j1 += term / (k as f64 + 1.0);
            term *= -q / ((k as f64 + 1.0) * (k as f64 + 1.0));
        }
        (j0, j1 * z / 2.0)
    };
    let mut checked = 0;
    for i in 0..20 {
        for j in 0..20 {
            let f = 2e4 * 10f64.powf(i as f64 / 8.0);
            let h = wire.h_sat * j as f64 / 19.0;
            let mu = gmi::permeability(&wire, h).unwrap();
            let delta = gmi::skin_depth(f, mu, wire.resistivity_rho).unwrap();
            let ka = Complex64::new(1.0, -1.0) * (wire.radius_a / delta);
            if ka.norm() >= 10.0 {
                continue;
            }
            let z = gmi::impedance(&wire, f, h).unwrap();
            let (j0, j1) = series_j0_j1(ka);
            let oracle = wire.r_dc * ka / 2.0 * j0 / j1;
            let rel = (z - oracle).norm() / oracle.norm();
            assert!(rel < 1e-8, "f {f:.3e}, h {h:.1}: rel {rel:.2e}");
            checked += 1;
        }
    }
    assert!(checked >= 100, "oracle grid too sparse: {checked}");

    // DC limit
    let mut w_dc = wire.clone();
    w_dc.mu_max = 1.0;
    for f in [5.0, 50.0, 500.0] {
        let delta = gmi::skin_depth(f, 1.0, w_dc.resistivity_rho).unwrap();
        assert!(w_dc.radius_a / delta < 0.05);
        let z = gmi::impedance(&w_dc, f, 0.0).unwrap();
        assert!((z - w_dc.r_dc).norm() / w_dc.r_dc < 1e-3, "f {f}: Z = {z}");
    }
    ok("09 gmi-physics");
}

// 10. Intrinsic noise at the nominal wire values (a = 30 um, l = 10 mm):
// 7.1 fT/sqrt(Hz) +- 5%.
#[test]
fn criterion_10_intrinsic_noise() {
    let mut wire = presets::wire_params("paper-wire").unwrap();
    wire.radius_a = 30e-6;
    wire.length_l = 10e-3;
    wire.standoff_r = 40e-6;
    let eta = gmi::intrinsic_noise(&wire, &presets::noise_params()).unwrap();
    assert!(
        (eta - 7.1e-15).abs() / 7.1e-15 < 0.05,
        "eta = {eta:.4e} T/sqrt(Hz)"
    );
    ok("10 intrinsic-noise");
}

// 11. delta-B formula: delta_b_per_fringe_half(10 us) = 3.571 uT +- 1e-3 uT.
#[test]
fn criterion_11_delta_b() {
    let db = delta_b_per_fringe_half(10e-6, 2.8e10).unwrap();
    assert!((db - 3.571e-6).abs() < 1e-9, "got {db:.6e}");
    ok("11 delta-b");
}

// 12. Calibration: synthetic 2.6 uT/mA map with saturating ends recovers the
// slope within 1% through the full ODMR pipeline, window excludes the ends.
#[test]
fn criterion_12_calibration() {
    let m = models();
    let cal = 2.6e-3;
    let i_lin = 0.060;
    let currents: Vec<f64> = (0..101).map(|i| -0.1 + i as f64 * 0.002).collect();
    let mut traces = Vec::new();
    for (i, &current) in currents.iter().enumerate() {
        let b_coil = calibrate::synthetic_coil_field(
            current,
            cal,
            i_lin,
            calibrate::DEFAULT_SAT_DROP,
            calibrate::DEFAULT_TAIL_SLOPE_FRAC,
        );
        let mut mm = m.clone();
        mm.bias_b_parallel = 0.5e-3 + b_coil;
        let span = 2.2 * m.nv.gyro_e * mm.bias_b_parallel.abs() + 12.0 * m.odmr_fwhm;
        let (seq, plan) = build_odmr(
            m.nv.zero_field_splitting_d - span / 2.0,
            m.nv.zero_field_splitting_d + span / 2.0,
            401,
            50_000,
            12_000 + i as u64,
            &mm,
        )
        .unwrap();
        let trace = run(&seq, &plan, &mm, RunContext::default()).unwrap();
        traces.push((trace.sweep_values, trace.mean_signal));
    }
    let result = calibrate::calibrate_coil(&currents, &traces, &m.nv).unwrap();
    assert!(
        (result.slope_t_per_a - cal).abs() / cal < 0.01,
        "slope {:.5e} vs {cal:.5e}",
        result.slope_t_per_a
    );
    let w_lo = currents[result.window_start];
    let w_hi = currents[result.window_start + result.window_len - 1];
    assert!(
        w_lo >= -(i_lin + 0.003) && w_hi <= i_lin + 0.003,
        "window [{w_lo}, {w_hi}]"
    );
    println!(
        "  slope = {:.4} uT/mA over [{:.0}, {:.0}] mA",
        result.slope_t_per_a * 1e3,
        w_lo * 1e3,
        w_hi * 1e3
    );
    ok("12 calibration");
}

// 13. Noise floor: white-noise count trace (1 s @ 1 kHz) lands within 10% of
// the closed-form density; the sensitive configuration floors above the
// background configuration.
#[test]
fn criterion_13_noise_floor() {
    // closed-form white-noise oracle
    let fs = 1000.0;
    let sigma = 9.0;
    let slope = 1.2e7;
    let mut stream = Stream::substream(1313, 0);
    let counts: Vec<f64> = (0..1000).map(|_| 140.0 + sigma * stream.normal()).collect();
    let spectrum = noise_spectral_density(&counts, fs, slope).unwrap();
    let oracle = sigma * (2.0 / fs).sqrt() / slope;
    let rel = (spectrum.mean_floor - oracle).abs() / oracle;
    assert!(
        rel < 0.10,
        "floor {:.3e} vs oracle {oracle:.3e}",
        spectrum.mean_floor
    );

    // sensitive vs background ordering through the experiment pipeline
    let config = parse_config("seed = 1313\n", Some(ExperimentKind::NoiseFloor), None).unwrap();
    let dir = std::env::temp_dir().join("nvgmi_acc13");
    let manifest = run_experiment(&config, "seed = 1313\n", &dir, OutputFormat::Csv).unwrap();
    assert!(manifest.files.iter().any(|f| f.name == "report.json"));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    let sensitive = report["sensitive_floor_t_per_sqrt_hz"].as_f64().unwrap();
    let background = report["background_floor_t_per_sqrt_hz"].as_f64().unwrap();
    assert!(
        sensitive > background,
        "sensitive {sensitive:.3e} !> background {background:.3e}"
    );
    println!(
        "  sensitive = {:.1} nT/rtHz, background = {:.1} nT/rtHz",
        sensitive * 1e9,
        background * 1e9
    );
    ok("13 noise-floor");
}

// 14. Wide-field: forward + reconstruct round-trip error < 5% of |B| per
// cell on the default 40-dipole chain with 4-axis sites; |B| map exactly
// invariant under a global moment flip.
#[test]
fn criterion_14_widefield() {
    let m = models();
    let chain = presets::default_domain_chain(&m.wire);
    let (mut sites, grid) = presets::default_widefield_sites(&m.wire);
    widefield::forward_map(&chain, &mut sites, &m.nv).unwrap();
    let map = widefield::reconstruct(&sites, &grid, &m.nv).unwrap();

    for cell in &map.cells {
        assert!(cell.valid, "cell at ({}, {}) invalid", cell.x, cell.y);
        let truth = gmi::stray_field(&chain, [cell.x, cell.y, 0.0]).unwrap();
        let mag = truth.iter().map(|v| v * v).sum::<f64>().sqrt();
        let err_plus: f64 = (0..3)
            .map(|i| (cell.b[i] - truth[i]).powi(2))
            .sum::<f64>()
            .sqrt();
        let err_minus: f64 = (0..3)
            .map(|i| (cell.b[i] + truth[i]).powi(2))
            .sum::<f64>()
            .sqrt();
        let err = err_plus.min(err_minus);
        assert!(
            err < 0.05 * mag,
            "cell ({}, {}): err {err:.3e} vs |B| {mag:.3e}",
            cell.x,
            cell.y
        );
    }

    // global moment flip: splittings are unchanged, so the reconstruction is
    // bitwise identical and the |B| map in particular is preserved exactly
    let mut flipped_chain = chain.clone();
    for d in flipped_chain.dipoles.iter_mut() {
        for c in d.moment.iter_mut() {
            *c = -*c;
        }
    }
    let (mut flipped_sites, _) = presets::default_widefield_sites(&m.wire);
    widefield::forward_map(&flipped_chain, &mut flipped_sites, &m.nv).unwrap();
    let flipped_map = widefield::reconstruct(&flipped_sites, &grid, &m.nv).unwrap();
    for (a, b) in map.cells.iter().zip(&flipped_map.cells) {
        assert_eq!(a.b_mag, b.b_mag, "|B| changed under global flip");
    }
    ok("14 widefield");
}

// 15. Determinism: an experiment rerun with identical config/seed, serial
// vs 8-way parallel, produces byte-identical trace files.
#[test]
fn criterion_15_determinism() {
    let config_text = "seed = 1515\nshots = 100000\n";
    let config = parse_config(config_text, Some(ExperimentKind::Magnetometry), None).unwrap();

    let dir_a = std::env::temp_dir().join("nvgmi_acc15_serial");
    let dir_b = std::env::temp_dir().join("nvgmi_acc15_parallel");
    let pool1 = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let pool8 = rayon::ThreadPoolBuilder::new()
        .num_threads(8)
        .build()
        .unwrap();
    pool1
        .install(|| run_experiment(&config, config_text, &dir_a, OutputFormat::Csv))
        .unwrap();
    pool8
        .install(|| run_experiment(&config, config_text, &dir_b, OutputFormat::Csv))
        .unwrap();

    for name in ["trace.csv", "report.json", "manifest.json"] {
        let a = std::fs::read(dir_a.join(name)).unwrap();
        let b = std::fs::read(dir_b.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between serial and 8-way parallel");
    }

    // rerun in place: bytes stable across invocations
    let dir_c = std::env::temp_dir().join("nvgmi_acc15_rerun");
    run_experiment(&config, config_text, &dir_c, OutputFormat::Csv).unwrap();
    let first = std::fs::read(dir_c.join("trace.csv")).unwrap();
    run_experiment(&config, config_text, &dir_c, OutputFormat::Csv).unwrap();
    let second = std::fs::read(dir_c.join("trace.csv")).unwrap();
    assert_eq!(first, second);
    ok("15 determinism");
}

// Propagated error contract: unknown preset ids exit with the config code
// and name the missing id.
#[test]
fn config_error_names_missing_preset() {
    let err = parse_config(
        "seed = 1\n[presets]\nwire = \"nope\"\n",
        Some(ExperimentKind::Odmr),
        None,
    )
    .unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("nope"));
    match err {
        Error::Config { path, .. } => assert_eq!(path, "wire_preset"),
        other => panic!("expected config error, got {other:?}"),
    }
}
