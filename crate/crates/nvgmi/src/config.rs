//! Experiment configuration: strict TOML with explicit units on every
//! physical quantity. A bare number where a unit belongs is a config error.

use crate::error::{Error, Result};
use crate::units::{parse_quantity, Dimension};
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Odmr,
    Rabi,
    Ramsey,
    Hahn,
    Magnetometry,
    SweepFac,
    NoiseFloor,
    Calibrate,
    Widefield,
    GmiCurve,
}

impl ExperimentKind {
    pub fn from_name(name: &str) -> Result<Self> {
        Ok(match name {
            "odmr" => ExperimentKind::Odmr,
            "rabi" => ExperimentKind::Rabi,
            "ramsey" => ExperimentKind::Ramsey,
            "hahn" => ExperimentKind::Hahn,
            "magnetometry" => ExperimentKind::Magnetometry,
            "sweep-fac" => ExperimentKind::SweepFac,
            "noise-floor" => ExperimentKind::NoiseFloor,
            "calibrate" => ExperimentKind::Calibrate,
            "widefield" => ExperimentKind::Widefield,
            "gmi-curve" => ExperimentKind::GmiCurve,
            other => {
                return Err(Error::config(
                    "experiment",
                    format!("unknown experiment kind `{other}`"),
                ))
            }
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Odmr => "odmr",
            ExperimentKind::Rabi => "rabi",
            ExperimentKind::Ramsey => "ramsey",
            ExperimentKind::Hahn => "hahn",
            ExperimentKind::Magnetometry => "magnetometry",
            ExperimentKind::SweepFac => "sweep-fac",
            ExperimentKind::NoiseFloor => "noise-floor",
            ExperimentKind::Calibrate => "calibrate",
            ExperimentKind::Widefield => "widefield",
            ExperimentKind::GmiCurve => "gmi-curve",
        }
    }
}

/// Magnetometry control variants (the synchronized run plus the three
/// null-result controls).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControlMode {
    Synchronized,
    NoRf,
    AsyncFrequency,
    AsyncPhase,
}

impl ControlMode {
    fn from_name(name: &str, path: &str) -> Result<Self> {
        Ok(match name {
            "synchronized" => ControlMode::Synchronized,
            "no_rf" => ControlMode::NoRf,
            "async_frequency" => ControlMode::AsyncFrequency,
            "async_phase" => ControlMode::AsyncPhase,
            other => {
                return Err(Error::config(
                    path,
                    format!("unknown control mode `{other}`"),
                ))
            }
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            ControlMode::Synchronized => "synchronized",
            ControlMode::NoRf => "no_rf",
            ControlMode::AsyncFrequency => "async_frequency",
            ControlMode::AsyncPhase => "async_phase",
        }
    }
}

// raw TOML shape; quantities arrive as strings and are converted in resolve()
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment: Option<String>,
    seed: Option<u64>,
    shots: Option<u64>,
    #[serde(default)]
    presets: RawPresets,
    odmr: Option<RawOdmr>,
    rabi: Option<RawRabi>,
    ramsey: Option<RawRamsey>,
    hahn: Option<RawHahn>,
    magnetometry: Option<RawMagnetometry>,
    sweep_fac: Option<RawSweepFac>,
    noise_floor: Option<RawNoiseFloor>,
    calibrate: Option<RawCalibrate>,
    widefield: Option<RawWidefield>,
    gmi_curve: Option<RawGmiCurve>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPresets {
    nv: Option<String>,
    wire: Option<String>,
    bias_b_parallel: Option<String>,
    odmr_fwhm: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOdmr {
    f_start: Option<String>,
    f_stop: Option<String>,
    points: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRabi {
    t_max: Option<String>,
    points: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRamsey {
    tau_max: Option<String>,
    points: Option<usize>,
    detuning: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHahn {
    two_tau_max: Option<String>,
    points: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMagnetometry {
    two_tau: Option<String>,
    v_ac: Option<String>,
    /// RF phase phi', rad (dimensionless number).
    phi_prime: Option<f64>,
    f_ac: Option<String>,
    b_start: Option<String>,
    b_stop: Option<String>,
    points: Option<usize>,
    control: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweepFac {
    two_tau_values: Option<Vec<String>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNoiseFloor {
    duration: Option<String>,
    sampling_rate: Option<String>,
    b_test: Option<String>,
    /// Background counts as a fraction of the sensitive-mode mean.
    ambient_fraction: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCalibrate {
    i_start: Option<String>,
    i_stop: Option<String>,
    points: Option<usize>,
    /// True coil constant of the synthetic map, T/A.
    cal_t_per_a: Option<f64>,
    i_lin: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWidefield {
    /// Scale factor on the default dipole moment.
    moment_scale: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGmiCurve {
    f_start: Option<String>,
    f_stop: Option<String>,
    f_points: Option<usize>,
    /// DC field grid in A/m (field-strength units carried in the name).
    h_max_a_per_m: Option<f64>,
    h_points: Option<usize>,
}

// resolved, SI-unit configuration ------------------------------------------

#[derive(Debug, Clone)]
pub struct OdmrConfig {
    pub f_start: f64,
    pub f_stop: f64,
    pub points: usize,
}

#[derive(Debug, Clone)]
pub struct RabiConfig {
    pub t_max: f64,
    pub points: usize,
}

#[derive(Debug, Clone)]
pub struct RamseyConfig {
    pub tau_max: f64,
    pub points: usize,
    pub detuning: f64,
}

#[derive(Debug, Clone)]
pub struct HahnConfig {
    pub two_tau_max: f64,
    pub points: usize,
}

#[derive(Debug, Clone)]
pub struct MagnetometryConfig {
    pub two_tau: f64,
    pub v_ac: f64,
    pub phi_prime: f64,
    pub f_ac_override: Option<f64>,
    pub b_start: f64,
    pub b_stop: f64,
    pub points: usize,
    pub control: ControlMode,
}

#[derive(Debug, Clone)]
pub struct SweepFacConfig {
    pub two_tau_values: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct NoiseFloorConfig {
    pub duration: f64,
    pub sampling_rate: f64,
    /// Test field during acquisition. `None` places the sensor at the point
    /// of maximum fringe slope inside the magnetometry window.
    pub b_test: Option<f64>,
    pub ambient_fraction: f64,
}

#[derive(Debug, Clone)]
pub struct CalibrateConfig {
    pub i_start: f64,
    pub i_stop: f64,
    pub points: usize,
    pub cal_t_per_a: f64,
    pub i_lin: f64,
}

#[derive(Debug, Clone)]
pub struct WidefieldConfig {
    pub moment_scale: f64,
}

#[derive(Debug, Clone)]
pub struct GmiCurveConfig {
    pub f_start: f64,
    pub f_stop: f64,
    pub f_points: usize,
    pub h_max: f64,
    pub h_points: usize,
}

/// Fully resolved experiment configuration in SI units.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub shots: u64,
    pub nv_preset: String,
    pub wire_preset: String,
    pub bias_b_parallel: f64,
    pub odmr_fwhm: f64,
    pub odmr: OdmrConfig,
    pub rabi: RabiConfig,
    pub ramsey: RamseyConfig,
    pub hahn: HahnConfig,
    pub magnetometry: MagnetometryConfig,
    pub sweep_fac: SweepFacConfig,
    pub noise_floor: NoiseFloorConfig,
    pub calibrate: CalibrateConfig,
    pub widefield: WidefieldConfig,
    pub gmi_curve: GmiCurveConfig,
}

fn quantity(raw: &Option<String>, dim: Dimension, path: &str, default: f64) -> Result<f64> {
    match raw {
        Some(text) => parse_quantity(text, dim, path),
        None => Ok(default),
    }
}

/// Parse and resolve a config document. `kind_override` comes from the CLI
/// subcommand; when the document also names an experiment they must agree.
pub fn parse_config(
    text: &str,
    kind_override: Option<ExperimentKind>,
    seed_override: Option<u64>,
) -> Result<ExperimentConfig> {
    let raw: RawConfig =
        toml::from_str(text).map_err(|e| Error::config("<document>", e.to_string()))?;

    let kind = match (kind_override, raw.experiment.as_deref()) {
        (Some(k), None) => k,
        (None, Some(name)) => ExperimentKind::from_name(name)?,
        (Some(k), Some(name)) => {
            let named = ExperimentKind::from_name(name)?;
            if named != k {
                return Err(Error::config(
                    "experiment",
                    format!(
                        "config names `{}` but the subcommand is `{}`",
                        named.name(),
                        k.name()
                    ),
                ));
            }
            k
        }
        (None, None) => {
            return Err(Error::config(
                "experiment",
                "no experiment kind given (config field or subcommand)",
            ))
        }
    };

    let seed = seed_override
        .or(raw.seed)
        .ok_or_else(|| Error::config("seed", "seed is mandatory (no wall-clock seeding)"))?;

    let op = crate::presets::operating_point();
    let shots = raw.shots.unwrap_or(20_000);

    let nv_preset = raw.presets.nv.clone().unwrap_or_else(|| "paper-nv".into());
    let wire_preset = raw
        .presets
        .wire
        .clone()
        .unwrap_or_else(|| "plated+annealed".into());
    // fail early on unknown presets
    crate::presets::nv_params(&nv_preset)?;
    crate::presets::wire_params(&wire_preset)?;

    let bias_b_parallel = quantity(
        &raw.presets.bias_b_parallel,
        Dimension::MagneticField,
        "presets.bias_b_parallel",
        crate::presets::DEFAULT_BIAS_B_PARALLEL,
    )?;
    let odmr_fwhm = quantity(
        &raw.presets.odmr_fwhm,
        Dimension::Frequency,
        "presets.odmr_fwhm",
        crate::presets::DEFAULT_ODMR_FWHM,
    )?;

    let o = raw.odmr.unwrap_or_default();
    let odmr = OdmrConfig {
        f_start: quantity(&o.f_start, Dimension::Frequency, "odmr.f_start", 2.845e9)?,
        f_stop: quantity(&o.f_stop, Dimension::Frequency, "odmr.f_stop", 2.895e9)?,
        points: o.points.unwrap_or(401),
    };

    let r = raw.rabi.unwrap_or_default();
    let rabi = RabiConfig {
        t_max: quantity(&r.t_max, Dimension::Time, "rabi.t_max", 200e-9)?,
        points: r.points.unwrap_or(101),
    };

    let r = raw.ramsey.unwrap_or_default();
    let ramsey = RamseyConfig {
        tau_max: quantity(&r.tau_max, Dimension::Time, "ramsey.tau_max", 4e-6)?,
        points: r.points.unwrap_or(2000),
        detuning: quantity(&r.detuning, Dimension::Frequency, "ramsey.detuning", 6e6)?,
    };

    let h = raw.hahn.unwrap_or_default();
    let hahn = HahnConfig {
        two_tau_max: quantity(&h.two_tau_max, Dimension::Time, "hahn.two_tau_max", 60e-6)?,
        points: h.points.unwrap_or(200),
    };

    let m = raw.magnetometry.unwrap_or_default();
    let magnetometry = MagnetometryConfig {
        two_tau: quantity(
            &m.two_tau,
            Dimension::Time,
            "magnetometry.two_tau",
            op.two_tau,
        )?,
        v_ac: quantity(&m.v_ac, Dimension::Voltage, "magnetometry.v_ac", op.v_ac)?,
        phi_prime: m.phi_prime.unwrap_or(0.0),
        f_ac_override: match &m.f_ac {
            Some(text) => Some(parse_quantity(
                text,
                Dimension::Frequency,
                "magnetometry.f_ac",
            )?),
            None => None,
        },
        b_start: quantity(
            &m.b_start,
            Dimension::MagneticField,
            "magnetometry.b_start",
            op.b_start,
        )?,
        b_stop: quantity(
            &m.b_stop,
            Dimension::MagneticField,
            "magnetometry.b_stop",
            op.b_stop,
        )?,
        points: m.points.unwrap_or(op.points),
        control: match &m.control {
            Some(name) => ControlMode::from_name(name, "magnetometry.control")?,
            None => ControlMode::Synchronized,
        },
    };

    let s = raw.sweep_fac.unwrap_or_default();
    let sweep_fac = SweepFacConfig {
        two_tau_values: match &s.two_tau_values {
            Some(list) => list
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    parse_quantity(
                        v,
                        Dimension::Time,
                        &format!("sweep_fac.two_tau_values[{i}]"),
                    )
                })
                .collect::<Result<Vec<f64>>>()?,
            None => vec![5e-6, 10e-6, 20e-6],
        },
    };

    let nfl = raw.noise_floor.unwrap_or_default();
    let noise_floor = NoiseFloorConfig {
        duration: quantity(&nfl.duration, Dimension::Time, "noise_floor.duration", 1.0)?,
        sampling_rate: quantity(
            &nfl.sampling_rate,
            Dimension::Frequency,
            "noise_floor.sampling_rate",
            1e3,
        )?,
        b_test: match &nfl.b_test {
            Some(text) => Some(parse_quantity(
                text,
                Dimension::MagneticField,
                "noise_floor.b_test",
            )?),
            None => None,
        },
        ambient_fraction: nfl.ambient_fraction.unwrap_or(0.07),
    };

    let c = raw.calibrate.unwrap_or_default();
    let calibrate = CalibrateConfig {
        i_start: quantity(&c.i_start, Dimension::Current, "calibrate.i_start", -0.1)?,
        i_stop: quantity(&c.i_stop, Dimension::Current, "calibrate.i_stop", 0.1)?,
        points: c.points.unwrap_or(101),
        cal_t_per_a: c.cal_t_per_a.unwrap_or(2.6e-3),
        i_lin: quantity(&c.i_lin, Dimension::Current, "calibrate.i_lin", 0.060)?,
    };

    let w = raw.widefield.unwrap_or_default();
    let widefield = WidefieldConfig {
        moment_scale: w.moment_scale.unwrap_or(1.0),
    };

    let g = raw.gmi_curve.unwrap_or_default();
    let gmi_curve = GmiCurveConfig {
        f_start: quantity(&g.f_start, Dimension::Frequency, "gmi_curve.f_start", 1e5)?,
        f_stop: quantity(&g.f_stop, Dimension::Frequency, "gmi_curve.f_stop", 2e7)?,
        f_points: g.f_points.unwrap_or(30),
        h_max: g.h_max_a_per_m.unwrap_or(4000.0),
        h_points: g.h_points.unwrap_or(41),
    };

    let config = ExperimentConfig {
        kind,
        seed,
        shots,
        nv_preset,
        wire_preset,
        bias_b_parallel,
        odmr_fwhm,
        odmr,
        rabi,
        ramsey,
        hahn,
        magnetometry,
        sweep_fac,
        noise_floor,
        calibrate,
        widefield,
        gmi_curve,
    };
    validate_config(&config)?;
    Ok(config)
}

fn validate_config(c: &ExperimentConfig) -> Result<()> {
    if c.shots == 0 {
        return Err(Error::config("shots", "must be >= 1"));
    }
    if !(c.odmr.f_start < c.odmr.f_stop) || c.odmr.points < 2 {
        return Err(Error::config(
            "odmr",
            "need f_start < f_stop and points >= 2",
        ));
    }
    if !(c.rabi.t_max > 0.0) || c.rabi.points < 2 {
        return Err(Error::config("rabi", "need t_max > 0 and points >= 2"));
    }
    if !(c.ramsey.tau_max > 0.0) || c.ramsey.points < 8 {
        return Err(Error::config("ramsey", "need tau_max > 0 and points >= 8"));
    }
    if !(c.hahn.two_tau_max > 0.0) || c.hahn.points < 8 {
        return Err(Error::config(
            "hahn",
            "need two_tau_max > 0 and points >= 8",
        ));
    }
    let m = &c.magnetometry;
    if !(m.two_tau > 0.0) || !(m.b_start < m.b_stop) || m.points < 8 {
        return Err(Error::config(
            "magnetometry",
            "need two_tau > 0, b_start < b_stop, points >= 8",
        ));
    }
    if !(0.0..=1.0).contains(&m.v_ac) {
        return Err(Error::config("magnetometry.v_ac", "must lie in [0, 1] V"));
    }
    if c.sweep_fac.two_tau_values.is_empty() {
        return Err(Error::config(
            "sweep_fac.two_tau_values",
            "must not be empty",
        ));
    }
    let n = &c.noise_floor;
    if !(n.duration >= 1.0) || !(n.sampling_rate > 0.0) {
        return Err(Error::config(
            "noise_floor",
            "need duration >= 1 s and sampling_rate > 0",
        ));
    }
    if !(0.0..1.0).contains(&n.ambient_fraction) {
        return Err(Error::config(
            "noise_floor.ambient_fraction",
            "must lie in [0, 1)",
        ));
    }
    let cal = &c.calibrate;
    if !(cal.i_start < cal.i_stop) || cal.points < MINIMUM_CAL_POINTS {
        return Err(Error::config(
            "calibrate",
            format!("need i_start < i_stop and points >= {MINIMUM_CAL_POINTS}"),
        ));
    }
    if !(c.widefield.moment_scale > 0.0) {
        return Err(Error::config("widefield.moment_scale", "must be > 0"));
    }
    let g = &c.gmi_curve;
    if !(g.f_start > 0.0) || !(g.f_start < g.f_stop) || g.f_points < 2 || g.h_points < 2 {
        return Err(Error::config(
            "gmi_curve",
            "need 0 < f_start < f_stop and >= 2 points",
        ));
    }
    Ok(())
}

const MINIMUM_CAL_POINTS: usize = 11;
