//! Physical constants (CODATA 2018) and documented defaults for ⁸⁵Rb.

use std::f64::consts::PI;

/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;

/// Unified atomic mass unit, kg.
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;

/// ⁸⁵Rb atomic mass, kg.
pub const RB85_MASS: f64 = 84.911_789_738 * ATOMIC_MASS_UNIT;

/// ⁸⁵Rb D2 natural linewidth Γ, rad/s.
pub const RB85_D2_LINEWIDTH: f64 = 2.0 * PI * 6.0666e6;

/// ⁸⁵Rb D2 saturation intensity (cycling transition), W/m².
pub const RB85_D2_SATURATION_INTENSITY: f64 = 16.693;

/// Lattice light wavelength used in the reference experiment, m.
pub const DEFAULT_WAVELENGTH: f64 = 780e-9;

/// Beam intersection angle of the reference experiment, rad.
pub const DEFAULT_INTERSECTION_ANGLE: f64 = 49.6 * PI / 180.0;
