//! Physical constants (CODATA 2018) and frequency helpers.

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Vacuum permeability, H/m.
pub const MU_0: f64 = 1.256_637_062_12e-6;
/// Vacuum permittivity, F/m.
pub const EPSILON_0: f64 = 8.854_187_812_8e-12;

/// Free-space wave impedance `sqrt(mu0/eps0)`, ohms.
pub fn free_space_impedance() -> f64 {
    (MU_0 / EPSILON_0).sqrt()
}

/// Free-space wavenumber `2 pi f / c`, rad/m.
pub fn wavenumber(frequency_hz: f64) -> f64 {
    2.0 * std::f64::consts::PI * frequency_hz / SPEED_OF_LIGHT
}

/// Free-space wavelength, m.
pub fn wavelength(frequency_hz: f64) -> f64 {
    SPEED_OF_LIGHT / frequency_hz
}

/// Default limit on the condition number of any matrix this crate inverts.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Passivity slack on the largest singular value of a scattering matrix.
pub const PASSIVITY_SLACK: f64 = 1e-9;
