//! Physical constants (SI, CODATA 2018 exact or recommended values).

/// Speed of light in vacuum, m/s.
pub const C: f64 = 299_792_458.0;
/// Planck constant, J·s.
pub const H: f64 = 6.626_070_15e-34;
/// Boltzmann constant, J/K.
pub const KB: f64 = 1.380_649e-23;
/// Atomic mass unit, kg.
pub const AMU: f64 = 1.660_539_066_60e-27;

pub(crate) const MHZ_PER_THZ: f64 = 1.0e6;
