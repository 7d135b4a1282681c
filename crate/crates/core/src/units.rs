//! Physical constants (CODATA 2018) and unit conversions.

use std::f64::consts::PI;

/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Vacuum permittivity, F/m.
pub const EPSILON_0: f64 = 8.854_187_8128e-12;
/// Speed of light, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Nuclear magneton, J/T.
pub const NUCLEAR_MAGNETON: f64 = 5.050_783_7461e-27;
/// Bohr magneton, J/T.
pub const BOHR_MAGNETON: f64 = 9.274_010_0783e-24;
/// Free-electron g-factor magnitude.
pub const ELECTRON_G: f64 = 2.002_319_304_362_56;

/// Cubic ångström in m³.
pub const ANGSTROM3: f64 = 1e-30;

pub fn hz_to_angular(f: f64) -> f64 {
    2.0 * PI * f
}

pub fn angular_to_hz(w: f64) -> f64 {
    w / (2.0 * PI)
}

/// W/cm² to W/m².
pub fn w_per_cm2_to_si(intensity: f64) -> f64 {
    intensity * 1e4
}

/// Polarizability volume (Å³) to SI polarizability (C·m²/V), `α = 4πε₀·V`.
pub fn polarizability_volume_to_si(volume_a3: f64) -> f64 {
    4.0 * PI * EPSILON_0 * volume_a3 * ANGSTROM3
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn electron_moment_is_about_1840_nuclear_magnetons() {
        let ratio = BOHR_MAGNETON / NUCLEAR_MAGNETON;
        assert!((ratio - 1836.15).abs() < 0.01);
        // the commonly quoted round figure
        assert!((ratio - 1840.0).abs() / 1840.0 < 0.01);
    }

    #[test]
    fn conversions_round_trip() {
        let f = 3.44e9;
        assert!((angular_to_hz(hz_to_angular(f)) - f).abs() < 1e-3);
        assert_eq!(w_per_cm2_to_si(1.0), 1e4);
    }
}
