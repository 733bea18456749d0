//! Physical constants (CODATA 2018, exact where defined) and unit helpers.

use std::f64::consts::PI;

pub const HBAR: f64 = 1.054_571_817e-34;
pub const K_B: f64 = 1.380_649e-23;
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const EPSILON_0: f64 = 8.854_187_812_8e-12;
/// Unified atomic mass unit in kg.
pub const AMU: f64 = 1.660_539_066_60e-27;
/// Mean molecular mass of dry air in kg.
pub const AIR_MOLECULE_MASS: f64 = 28.97 * AMU;

/// Pascal per millibar.
pub const PA_PER_MBAR: f64 = 100.0;

pub fn hz_to_rad_s(f: f64) -> f64 {
    2.0 * PI * f
}

pub fn rad_s_to_hz(w: f64) -> f64 {
    w / (2.0 * PI)
}
