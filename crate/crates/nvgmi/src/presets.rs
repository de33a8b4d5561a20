//! Built-in parameter presets: the measured-device NV and wire values, the
//! pristine / plated / plated+annealed wire variants, the default domain
//! chain, the wide-field site layout, and the magnetometry operating point.

use crate::error::{Error, Result};
use crate::gmi::{Dipole, DomainChain, GmiWire, NoiseParams};
use crate::sequence::Models;
use crate::spin::NvParams;
use crate::widefield::{GridSpec, NvSite, NV_AXES};

/// NV preset names understood by [`nv_params`].
pub const NV_PRESETS: [&str; 1] = ["paper-nv"];

/// Wire preset names understood by [`wire_params`].
pub const WIRE_PRESETS: [&str; 5] = [
    "paper-wire",
    "pristine",
    "plated",
    "plated+annealed",
    "double-peak",
];

/// The measured single-NV parameter set: D = 2870 MHz, gamma = 28 GHz/T,
/// A = 3 MHz, T2* = 0.69 us, T2 = 21 us (p = 2), Omega_R = 10 MHz. The photon
/// budget (2.4 photons/shot at 33% contrast) is the calibrated default that
/// reproduces the headline sensitivity scale with statistically comfortable
/// fit recoveries; see the README.
pub fn nv_params(preset: &str) -> Result<NvParams> {
    match preset {
        "paper-nv" => Ok(NvParams {
            zero_field_splitting_d: 2.870e9,
            gyro_e: 2.8e10,
            hyperfine_a: 3.0e6,
            t2_star: 0.69e-6,
            t2: 21e-6,
            stretch_p: 2.0,
            rabi_freq: 10e6,
            contrast_c: 0.33,
            photons_bright: 2.4,
        }),
        other => Err(Error::config(
            "nv_preset",
            format!("unknown NV preset `{other}`; known: {NV_PRESETS:?}"),
        )),
    }
}

/// Wire presets. All share the measured geometry (25 um diameter, 30 mm
/// length, 10.2 Ohm) and differ in the magnetic softness and the calibrated
/// transduction gain:
///
/// * `pristine`        - unplated wire: sharper anisotropy knee, weaker and
///   less regular transduction.
/// * `plated`          - gold-plated: smooth stable response.
/// * `plated+annealed` - plated and Joule-annealed: the most sensitive
///   variant and the default (alias `paper-wire`).
pub fn wire_params(preset: &str) -> Result<GmiWire> {
    let base = GmiWire {
        radius_a: 12.5e-6,
        length_l: 30e-3,
        resistivity_rho: 1.3e-6,
        r_dc: 10.2,
        mu_max: 1e4,
        h_k: 350.0,
        h_offset: 0.0,
        h_sat: 4000.0,
        transduction_gain_g: 18.0,
        standoff_r: 20e-6,
    };
    match preset {
        "paper-wire" | "plated+annealed" => Ok(base),
        "plated" => Ok(GmiWire {
            transduction_gain_g: 12.0,
            ..base
        }),
        "pristine" => Ok(GmiWire {
            mu_max: 2e4,
            h_k: 150.0,
            transduction_gain_g: 8.0,
            ..base
        }),
        // alternate permeability shape: response maxima at +-h_offset, the
        // double-peak structure seen at higher drive frequencies
        "double-peak" => Ok(GmiWire {
            h_offset: 800.0,
            ..base
        }),
        other => Err(Error::config(
            "wire_preset",
            format!("unknown wire preset `{other}`; known: {WIRE_PRESETS:?}"),
        )),
    }
}

pub fn noise_params() -> NoiseParams {
    NoiseParams::default()
}

/// Static stray-field projection on the NV axis at the working NV, T.
pub const DEFAULT_BIAS_B_PARALLEL: f64 = 0.5e-3;

/// Default ODMR dip FWHM, Hz (independent parameter; power broadening and
/// T2* are not disentangled).
pub const DEFAULT_ODMR_FWHM: f64 = 0.9e6;

/// The magnetometry operating point.
pub struct OperatingPoint {
    /// Echo free-evolution time 2 tau, s.
    pub two_tau: f64,
    /// Drive amplitude, V.
    pub v_ac: f64,
    /// Repetitions per sweep point.
    pub shots: u64,
    /// External-field sweep window, T. Centered on the inflection of the
    /// drive-to-field transduction (h = h_k / sqrt(5)) where the response is
    /// most linear.
    pub b_start: f64,
    pub b_stop: f64,
    pub points: usize,
}

pub fn operating_point() -> OperatingPoint {
    OperatingPoint {
        two_tau: 10e-6,
        v_ac: 1.0,
        shots: 500_000,
        b_start: 163e-6,
        b_stop: 230e-6,
        points: 81,
    }
}

/// Models bundle for a pair of presets.
pub fn models(nv_preset: &str, wire_preset: &str) -> Result<Models> {
    Ok(Models {
        nv: nv_params(nv_preset)?,
        wire: wire_params(wire_preset)?,
        noise: noise_params(),
        bias_b_parallel: DEFAULT_BIAS_B_PARALLEL,
        odmr_fwhm: DEFAULT_ODMR_FWHM,
        nv_preset: nv_preset.to_string(),
        wire_preset: wire_preset.to_string(),
    })
}

/// Dipole moment magnitude of the default chain, A*m^2. Chosen so the stray
/// field 15 um from the axis lies in the few-tenths-of-a-millitesla range.
pub const DEFAULT_DIPOLE_MOMENT: f64 = 8e-12;

/// Number of dipoles in the default chain.
pub const DEFAULT_CHAIN_DIPOLES: usize = 40;

/// Axial spacing between chain dipoles, m (domain scale).
pub const DEFAULT_CHAIN_SPACING: f64 = 25e-6;

/// Default domain chain: 40 point dipoles at 25 um spacing centered on the
/// wire middle, moments transverse to the axis with alternating sign and an
/// alternating out-of-plane tilt.
pub fn default_domain_chain(wire: &GmiWire) -> DomainChain {
    let n = DEFAULT_CHAIN_DIPOLES;
    let center = wire.length_l / 2.0;
    let start = center - (n as f64 - 1.0) / 2.0 * DEFAULT_CHAIN_SPACING;
    let tilt = 18f64.to_radians();
    let dipoles = (0..n)
        .map(|i| {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            let tilt_sign = if (i / 2) % 2 == 0 { 1.0 } else { -1.0 };
            Dipole {
                position: start + i as f64 * DEFAULT_CHAIN_SPACING,
                moment: [
                    0.0,
                    sign * DEFAULT_DIPOLE_MOMENT * tilt.cos(),
                    tilt_sign * DEFAULT_DIPOLE_MOMENT * tilt.sin(),
                ],
            }
        })
        .collect();
    DomainChain { dipoles }
}

/// Default wide-field layout: a grid of cells beside the wire (the wire runs
/// along x at y = z = 0), each cell holding all four NV orientations at the
/// cell center. Lateral standoffs span 14-24 um. The grid is offset from the
/// dipole columns: exactly above a dipole the axial field component vanishes
/// and the four-axis |projection| data degenerates under a y/z swap.
pub fn default_widefield_sites(wire: &GmiWire) -> (Vec<NvSite>, GridSpec) {
    let center = wire.length_l / 2.0;
    let grid = GridSpec {
        x0: center - 18.75e-6,
        y0: 14e-6,
        dx: 2.5e-6,
        dy: 2.5e-6,
        nx: 17,
        ny: 5,
        radius: 2e-6,
    };
    let mut sites = Vec::with_capacity(grid.nx * grid.ny * 4);
    for iy in 0..grid.ny {
        for ix in 0..grid.nx {
            let x = grid.x0 + ix as f64 * grid.dx;
            let y = grid.y0 + iy as f64 * grid.dy;
            for axis in NV_AXES {
                sites.push(NvSite {
                    position: [x, y, 0.0],
                    axis,
                    odmr_splitting: 0.0,
                });
            }
        }
    }
    (sites, grid)
}

/// Serializable preset catalog for the CLI.
#[derive(Debug, serde::Serialize, serde::Deserialize, PartialEq)]
pub struct PresetCatalog {
    pub nv: Vec<(String, NvParams)>,
    pub wires: Vec<(String, GmiWire)>,
    pub noise: NoiseParams,
}

pub fn catalog() -> PresetCatalog {
    PresetCatalog {
        nv: NV_PRESETS
            .iter()
            .map(|name| (name.to_string(), nv_params(name).unwrap()))
            .collect(),
        wires: WIRE_PRESETS
            .iter()
            .map(|name| (name.to_string(), wire_params(name).unwrap()))
            .collect(),
        noise: noise_params(),
    }
}
