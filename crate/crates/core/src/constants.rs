//! Physical constants (CODATA 2018) and default apparatus values.

/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;

/// Planck constant, J·s.
pub const PLANCK: f64 = 2.0 * std::f64::consts::PI * HBAR;

/// Neutron rest mass, kg.
pub const NEUTRON_MASS: f64 = 1.674_927_498_04e-27;

/// Free-neutron mean lifetime, s.
pub const NEUTRON_LIFETIME: f64 = 885.7;

/// Default de Broglie wavelength of the beam, m.
pub const DEFAULT_WAVELENGTH: f64 = 1.845e-9;

/// Default slit width, m.
pub const DEFAULT_SLIT_WIDTH: f64 = 2.2e-5;

/// Default center-to-center slit separation, m.
pub const DEFAULT_SLIT_SEPARATION: f64 = 1.0e-4;

/// Default slit-to-screen distance, m.
pub const DEFAULT_SCREEN_DISTANCE: f64 = 5.0;

/// Longitudinal speed of a neutron with the given de Broglie wavelength.
pub fn speed_for_wavelength(wavelength: f64) -> f64 {
    PLANCK / (NEUTRON_MASS * wavelength)
}
