//! Physical constants (SI, CODATA 2018 exact values where defined).

use std::f64::consts::PI;

/// Vacuum permeability, T·m/A.
pub const MU_0: f64 = 4.0 * PI * 1e-7;

/// Planck constant, J·s (exact).
pub const PLANCK_H: f64 = 6.626_070_15e-34;

/// Boltzmann constant, J/K (exact).
pub const K_BOLTZMANN: f64 = 1.380_649e-23;

/// Bohr magneton, J/T.
pub const MU_BOHR: f64 = 9.274_010_078_3e-24;

/// Electron g-factor used for the shot-noise field conversion.
pub const G_ELECTRON: f64 = 2.0;
