//! Soft-ferromagnetic microwire model: field-dependent permeability, skin
//! depth, complex cylindrical impedance, GMI ratio, drive-to-field
//! transduction at the NV position, domain stray fields, and the intrinsic
//! thermal-magnetization noise floor.

use crate::constants::{K_BOLTZMANN, MU_0};
use crate::error::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Wire geometry and material model. The impedance formula uses the measured
/// DC resistance directly for normalization, so `resistivity_rho` only enters
/// through the skin depth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmiWire {
    /// Wire radius, m.
    pub radius_a: f64,
    /// Wire length, m.
    pub length_l: f64,
    /// Resistivity, Ohm*m.
    pub resistivity_rho: f64,
    /// Measured end-to-end DC resistance, Ohm.
    pub r_dc: f64,
    /// Peak relative permeability at zero field.
    pub mu_max: f64,
    /// Anisotropy field scale of the permeability roll-off, A/m.
    pub h_k: f64,
    /// Permeability peak position, A/m. Zero gives the default single-peak
    /// response; a positive value moves the peaks to +-h_offset, the
    /// double-peak shape higher drive frequencies show.
    pub h_offset: f64,
    /// Saturation field used to normalize the GMI ratio, A/m.
    pub h_sat: f64,
    /// Dimensionless transduction calibration constant. Absorbs the
    /// circumferential permeability enhancement of the near field and the
    /// NV-axis projection; fixed once per preset by a calibration run.
    pub transduction_gain_g: f64,
    /// NV-to-wire-axis distance, m.
    pub standoff_r: f64,
}

impl Default for GmiWire {
    fn default() -> Self {
        GmiWire {
            radius_a: 12.5e-6,
            length_l: 30e-3,
            resistivity_rho: 1.3e-6,
            r_dc: 10.2,
            mu_max: 1e4,
            h_k: 350.0,
            h_offset: 0.0,
            h_sat: 4000.0,
            transduction_gain_g: 1.0,
            standoff_r: 20e-6,
        }
    }
}

impl GmiWire {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius_a > 0.0 && self.length_l > 0.0 && self.r_dc > 0.0) {
            return Err(Error::invalid("wire radius, length and r_dc must be > 0"));
        }
        if !(self.mu_max >= 1.0) {
            return Err(Error::invalid(format!(
                "mu_max must be >= 1, got {}",
                self.mu_max
            )));
        }
        if !(self.h_k > 0.0) {
            return Err(Error::invalid(format!("h_k must be > 0, got {}", self.h_k)));
        }
        if !(self.h_offset >= 0.0) {
            return Err(Error::invalid(format!(
                "h_offset must be >= 0, got {}",
                self.h_offset
            )));
        }
        if !(self.standoff_r > self.radius_a) {
            return Err(Error::invalid(format!(
                "standoff_r ({}) must exceed radius_a ({})",
                self.standoff_r, self.radius_a
            )));
        }
        if !(self.resistivity_rho > 0.0) {
            return Err(Error::invalid("resistivity must be > 0"));
        }
        Ok(())
    }
}

/// Field-dependent relative permeability, memoryless (no hysteresis):
/// mu_r(h) = 1 + (mu_max - 1) / (1 + ((|h| - h_offset)/h_k)^2).
/// Even in h. With the default h_offset = 0 this is the single-peak model,
/// strictly decreasing in |h|; a positive offset gives the double-peak
/// response with maxima at +-h_offset.
pub fn permeability(wire: &GmiWire, h_dc: f64) -> Result<f64> {
    if !h_dc.is_finite() {
        return Err(Error::invalid(format!("h_dc must be finite, got {h_dc}")));
    }
    let x = (h_dc.abs() - wire.h_offset) / wire.h_k;
    Ok(1.0 + (wire.mu_max - 1.0) / (1.0 + x * x))
}

/// Skin depth delta_m = sqrt(2*rho / (omega * mu_r * mu_0)).
pub fn skin_depth(f_ac: f64, mu_r: f64, rho: f64) -> Result<f64> {
    if !(f_ac > 0.0) {
        return Err(Error::invalid(format!(
            "skin depth requires f_ac > 0, got {f_ac}"
        )));
    }
    if !(mu_r >= 1.0) || !(rho > 0.0) {
        return Err(Error::invalid("skin depth requires mu_r >= 1 and rho > 0"));
    }
    Ok((2.0 * rho / (2.0 * PI * f_ac * mu_r * MU_0)).sqrt())
}

/// Largest |k*a| the Bessel-ratio evaluation accepts.
const KA_LIMIT: f64 = 1e4;

/// Complex impedance of the cylindrical conductor:
/// Z = r_dc * (k*a/2) * J0(k*a) / J1(k*a), k = (1 - i)/delta_m.
pub fn impedance(wire: &GmiWire, f_ac: f64, h_dc: f64) -> Result<Complex64> {
    let mu_r = permeability(wire, h_dc)?;
    let delta = skin_depth(f_ac, mu_r, wire.resistivity_rho)?;
    let k = Complex64::new(1.0, -1.0) / delta;
    let ka = k * wire.radius_a;
    if ka.norm() > KA_LIMIT {
        return Err(Error::OutOfRegime(format!(
            "|k*a| = {:.3e} exceeds {KA_LIMIT:.0e}; reduce frequency or permeability",
            ka.norm()
        )));
    }
    let ratio = bessel_j1_over_j0(ka)?;
    Ok(wire.r_dc * ka / 2.0 / ratio)
}

/// J1(z)/J0(z) by the continued fraction from the downward Bessel recurrence,
/// evaluated with the modified Lentz algorithm. Valid for complex z away from
/// zeros of J0 (which are real, while our arguments sit on the (1 - i) ray).
fn bessel_j1_over_j0(z: Complex64) -> Result<Complex64> {
    if z.norm() < 1e-12 {
        // leading series term; avoids 0/0 at z = 0
        return Ok(z / 2.0);
    }
    // small but far from the f64 underflow edge: norm_sqr(tiny) must stay normal
    let tiny = Complex64::new(1e-30, 0.0);
    let eps = 1e-14;
    let max_iter = (2.0 * z.norm()) as usize + 200;

    // r = 1 / (2/z - 1 / (4/z - 1 / (6/z - ...)))
    let mut f = tiny;
    let mut c = f;
    let mut d = Complex64::new(0.0, 0.0);
    for n in 1..=max_iter {
        let a_n = if n == 1 {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(-1.0, 0.0)
        };
        let b_n = Complex64::new(2.0 * n as f64, 0.0) / z;
        d = b_n + a_n * d;
        if d.norm() == 0.0 {
            d = tiny;
        }
        c = b_n + a_n / c;
        if c.norm() == 0.0 {
            c = tiny;
        }
        d = d.inv();
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).norm() < eps {
            return Ok(f);
        }
    }
    Err(Error::OutOfRegime(format!(
        "Bessel ratio continued fraction did not converge for |z| = {:.3e}",
        z.norm()
    )))
}

/// GMI ratio, percent: 100 * (|Z(h)| - |Z(h_sat)|) / |Z(h_sat)|.
pub fn gmi_ratio(wire: &GmiWire, f_ac: f64, h_dc: f64) -> Result<f64> {
    let z = impedance(wire, f_ac, h_dc)?.norm();
    let z_sat = impedance(wire, f_ac, wire.h_sat)?.norm();
    Ok(100.0 * (z - z_sat) / z_sat)
}

/// AC field amplitude at the NV position for a drive voltage `v_ac` at
/// `f_ac` under an external DC field `b_dc_external` (applied axially, so
/// h = B/mu_0). The drive current is v/|Z| and the near field is the
/// azimuthal field of that current scaled by the calibrated gain.
pub fn ac_field_at_nv(wire: &GmiWire, v_ac: f64, f_ac: f64, b_dc_external: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&v_ac) {
        return Err(Error::invalid(format!(
            "v_ac must lie in [0, 1] V, got {v_ac}"
        )));
    }
    if v_ac == 0.0 {
        return Ok(0.0);
    }
    let h_dc = b_dc_external / MU_0;
    let z = impedance(wire, f_ac, h_dc)?.norm();
    let i_ac = v_ac / z;
    Ok(wire.transduction_gain_g * MU_0 * i_ac / (2.0 * PI * wire.standoff_r))
}

/// A point magnetic dipole sitting on the wire axis (the wire runs along x
/// from 0 to length_l).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Dipole {
    /// Position along the wire axis, m.
    pub position: f64,
    /// Moment vector, A*m^2.
    pub moment: [f64; 3],
}

/// Chain of point dipoles standing in for the wire's magnetic domains.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct DomainChain {
    pub dipoles: Vec<Dipole>,
}

impl DomainChain {
    pub fn validate(&self, wire: &GmiWire) -> Result<()> {
        for (i, d) in self.dipoles.iter().enumerate() {
            if d.position < 0.0 || d.position > wire.length_l {
                return Err(Error::invalid(format!(
                    "dipole {i} at {} m lies outside the wire [0, {}]",
                    d.position, wire.length_l
                )));
            }
        }
        Ok(())
    }
}

/// Minimum approach distance to any dipole before the field is declared
/// singular.
pub const DIPOLE_SINGULARITY_RADIUS: f64 = 1e-9;

/// Static stray field of the domain chain at `position`:
/// B(r) = (mu_0/4pi) * [3 rhat (m . rhat) - m] / |r|^3 summed over dipoles.
pub fn stray_field(chain: &DomainChain, position: [f64; 3]) -> Result<[f64; 3]> {
    let mut out = [0.0f64; 3];
    for (i, d) in chain.dipoles.iter().enumerate() {
        let r = [position[0] - d.position, position[1], position[2]];
        let r2 = r[0] * r[0] + r[1] * r[1] + r[2] * r[2];
        let dist = r2.sqrt();
        if dist < DIPOLE_SINGULARITY_RADIUS {
            return Err(Error::Singularity {
                dipole: i,
                distance_m: dist,
            });
        }
        let inv3 = 1.0 / (r2 * dist);
        let rhat = [r[0] / dist, r[1] / dist, r[2] / dist];
        let m_dot_rhat = d.moment[0] * rhat[0] + d.moment[1] * rhat[1] + d.moment[2] * rhat[2];
        let scale = MU_0 / (4.0 * PI) * inv3;
        for axis in 0..3 {
            out[axis] += scale * (3.0 * rhat[axis] * m_dot_rhat - d.moment[axis]);
        }
    }
    Ok(out)
}

/// Material parameters of the thermal-magnetization noise floor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    /// Dimensionless Gilbert damping.
    pub alpha: f64,
    /// Temperature, K.
    pub temperature_t: f64,
    /// Saturation magnetization, A/m.
    pub m_s_saturation: f64,
    /// Electron gyromagnetic ratio, Hz/T.
    pub gamma_e: f64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        NoiseParams {
            alpha: 0.01,
            temperature_t: 300.0,
            m_s_saturation: 660e3,
            gamma_e: 2.8e10,
        }
    }
}

impl NoiseParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0
            && self.temperature_t > 0.0
            && self.m_s_saturation > 0.0
            && self.gamma_e > 0.0)
        {
            return Err(Error::invalid("all noise parameters must be > 0"));
        }
        Ok(())
    }
}

/// Intrinsic magnetic noise amplitude of the wire, T/sqrt(Hz):
/// sqrt(2 alpha k_B T / (Gamma_e M_s pi^2 a^2 l)).
pub fn intrinsic_noise(wire: &GmiWire, noise: &NoiseParams) -> Result<f64> {
    noise.validate()?;
    let density = 2.0 * noise.alpha * K_BOLTZMANN * noise.temperature_t
        / (noise.gamma_e
            * noise.m_s_saturation
            * PI
            * PI
            * wire.radius_a
            * wire.radius_a
            * wire.length_l);
    Ok(density.sqrt())
}
