//! One-dimensional optical lattice: geometry, light-shift depth, the isolated
//! well's bound states and evolution within a (possibly shifted) well.

mod dynamics;
mod solver;

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::constants::HBAR;
use crate::oscillator::OscillatorSpec;
use crate::{Error, Result};

pub use dynamics::{evolve_in_well, shifted_bound_states, shifted_hamiltonian_matrix, ShiftedHamiltonian};
pub use solver::{solve_bound_states, solve_well_states, BoundStateBasis, DEFAULT_GRID_SIZE};

/// Lattice wave number `k_L = (2π/λ) sin(γ/2)`.
pub fn lattice_vector(wavelength: f64, angle: f64) -> Result<f64> {
    if !(wavelength > 0.0) || !wavelength.is_finite() {
        return Err(Error::param("wavelength", format!("must be positive, got {wavelength}")));
    }
    if !(angle > 0.0 && angle <= PI) {
        return Err(Error::param("intersection_angle", format!("must lie in (0, π], got {angle}")));
    }
    Ok(TAU / wavelength * (0.5 * angle).sin())
}

/// Recoil energy `E_r = ħ²k_L²/2m`.
pub fn recoil_energy(k_l: f64, mass: f64) -> f64 {
    HBAR * HBAR * k_l * k_l / (2.0 * mass)
}

/// Harmonic well frequency `ω = (4k_L/π)√(U₀/m)`.
pub fn well_frequency(depth: f64, mass: f64, k_l: f64) -> f64 {
    4.0 * k_l / PI * (depth / mass).sqrt()
}

/// Inverse of [`well_frequency`]: the depth giving frequency `omega`.
pub fn depth_for_frequency(omega: f64, mass: f64, k_l: f64) -> f64 {
    let r = omega * PI / (4.0 * k_l);
    mass * r * r
}

/// Light-shift depth `U₀ = I₀ ħΓ²/(4ΔI_s)`; the sign follows the detuning.
pub fn depth_from_intensity(intensity: f64, detuning: f64, linewidth: f64, saturation_intensity: f64) -> Result<f64> {
    if detuning == 0.0 || !detuning.is_finite() {
        return Err(Error::param("detuning", "must be nonzero and finite"));
    }
    if !(saturation_intensity > 0.0) {
        return Err(Error::param("saturation_intensity", "must be positive"));
    }
    Ok(intensity * HBAR * linewidth * linewidth / (4.0 * detuning * saturation_intensity))
}

/// Peak intensity producing light-shift depth `depth`.
pub fn intensity_for_depth(depth: f64, detuning: f64, linewidth: f64, saturation_intensity: f64) -> Result<f64> {
    if detuning == 0.0 || !detuning.is_finite() {
        return Err(Error::param("detuning", "must be nonzero and finite"));
    }
    if linewidth == 0.0 {
        return Err(Error::param("linewidth", "must be nonzero"));
    }
    Ok(depth * 4.0 * detuning * saturation_intensity / (HBAR * linewidth * linewidth))
}

/// Geometry, depth and atomic mass of the lattice.
///
/// `k_L`, the period and the recoil energy are always derived from the
/// wavelength and angle, never stored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    wavelength: f64,
    intersection_angle: f64,
    depth: f64,
    mass: f64,
}

impl LatticeSpec {
    pub fn new(wavelength: f64, intersection_angle: f64, depth: f64, mass: f64) -> Result<Self> {
        lattice_vector(wavelength, intersection_angle)?;
        if !(depth > 0.0) || !depth.is_finite() {
            return Err(Error::param("depth", format!("must be positive, got {depth}")));
        }
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(Error::param("mass", format!("must be positive, got {mass}")));
        }
        Ok(LatticeSpec { wavelength, intersection_angle, depth, mass })
    }

    /// Depth given in units of the lattice's own recoil energy.
    pub fn with_depth_in_recoils(wavelength: f64, intersection_angle: f64, depth_er: f64, mass: f64) -> Result<Self> {
        let k = lattice_vector(wavelength, intersection_angle)?;
        LatticeSpec::new(wavelength, intersection_angle, depth_er * recoil_energy(k, mass), mass)
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn intersection_angle(&self) -> f64 {
        self.intersection_angle
    }

    pub fn depth(&self) -> f64 {
        self.depth
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn k_l(&self) -> f64 {
        TAU / self.wavelength * (0.5 * self.intersection_angle).sin()
    }

    /// Spatial period `a = π/k_L`.
    pub fn period(&self) -> f64 {
        PI / self.k_l()
    }

    pub fn recoil_energy(&self) -> f64 {
        recoil_energy(self.k_l(), self.mass)
    }

    pub fn depth_in_recoils(&self) -> f64 {
        self.depth / self.recoil_energy()
    }

    pub fn with_depth(&self, depth: f64) -> Result<Self> {
        LatticeSpec::new(self.wavelength, self.intersection_angle, depth, self.mass)
    }

    /// [`well_frequency`] for this lattice.
    pub fn well_frequency(&self) -> f64 {
        well_frequency(self.depth, self.mass, self.k_l())
    }

    /// Frequency from the curvature of `U₀ sin²(k_L x)` at the well bottom,
    /// `k_L √(2U₀/m)`.
    pub fn curvature_frequency(&self) -> f64 {
        self.k_l() * (2.0 * self.depth / self.mass).sqrt()
    }

    /// Oscillator used by the tomography protocol for this lattice.
    pub fn oscillator(&self) -> Result<OscillatorSpec> {
        OscillatorSpec::new(self.mass, self.well_frequency())
    }

    /// Potential measured from the well bottom, `U₀ sin²(k_L (x − d))`, so
    /// that the barrier tops at `d ± a/2` sit at `U₀`.
    pub fn potential(&self, x: f64, shift: f64) -> f64 {
        let s = (self.k_l() * (x - shift)).sin();
        self.depth * s * s
    }

    pub fn shift_for_phase(&self, phase: f64) -> PotentialShift {
        PotentialShift::from_phase(phase, self.period())
    }
}

/// A lattice translation produced by a relative beam phase `φ`:
/// `d = aφ/2π`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialShift {
    phase: f64,
    displacement: f64,
}

impl PotentialShift {
    pub fn from_phase(phase: f64, period: f64) -> Self {
        PotentialShift { phase, displacement: period * phase / TAU }
    }

    pub fn from_displacement(displacement: f64, period: f64) -> Self {
        PotentialShift { phase: TAU * displacement / period, displacement }
    }

    pub fn none() -> Self {
        PotentialShift { phase: 0.0, displacement: 0.0 }
    }

    pub fn phase(&self) -> f64 {
        self.phase
    }

    pub fn displacement(&self) -> f64 {
        self.displacement
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::{ATOMIC_MASS_UNIT, RB85_D2_LINEWIDTH, RB85_D2_SATURATION_INTENSITY};
    use proptest::prelude::*;

    const M85: f64 = 85.0 * ATOMIC_MASS_UNIT;

    fn deg(d: f64) -> f64 {
        d * PI / 180.0
    }

    #[test]
    fn reference_lattice_vector_and_period() {
        let k = lattice_vector(780e-9, deg(49.6)).unwrap();
        assert!((k / 3.38e6 - 1.0).abs() < 0.005, "k_L = {k}");
        let spec = LatticeSpec::with_depth_in_recoils(780e-9, deg(49.6), 37.0, M85).unwrap();
        assert!((spec.period() / 0.93e-6 - 1.0).abs() < 0.005, "a = {}", spec.period());
        assert!((spec.period() * spec.k_l() - PI).abs() < 1e-15);
    }

    #[test]
    fn counter_propagating_limit() {
        let k = lattice_vector(780e-9, PI).unwrap();
        assert!((k - TAU / 780e-9).abs() / k < 1e-15);
    }

    #[test]
    fn angle_range_enforced() {
        assert!(lattice_vector(780e-9, 0.0).is_err());
        assert!(lattice_vector(780e-9, 3.2).is_err());
        assert!(lattice_vector(-1.0, 1.0).is_err());
        assert!(LatticeSpec::new(780e-9, 1.0, -1.0, M85).is_err());
    }

    #[test]
    fn recoil_energy_values() {
        // ħ²k²/2m with CODATA ħ and u
        let er = recoil_energy(3.38e6, M85);
        let direct = (1.054_571_817e-34f64 * 3.38e6).powi(2) / (2.0 * 85.0 * 1.660_539_066_60e-27);
        assert!((er - direct).abs() / direct < 1e-14);
        assert!((er / 4.5e-31 - 1.0).abs() < 0.01, "E_r = {er}");
        assert!((recoil_energy(6.76e6, M85) / er - 4.0).abs() < 1e-12);
        assert!((37.0 * er / 1.67e-29 - 1.0).abs() < 0.01);
    }

    #[test]
    fn reference_well_frequency() {
        let spec = LatticeSpec::with_depth_in_recoils(780e-9, deg(49.6), 37.0, M85).unwrap();
        let w = spec.well_frequency();
        assert!((w / 48.33e3 - 1.0).abs() < 0.05, "ω = {w}");
        let quad = spec.with_depth(4.0 * spec.depth()).unwrap();
        assert!((quad.well_frequency() / w - 2.0).abs() < 1e-12);
    }

    #[test]
    fn depth_for_two_bound_state_frequency() {
        let k = lattice_vector(780e-9, deg(49.6)).unwrap();
        let depth = depth_for_frequency(32.2e3, M85, k);
        let er = recoil_energy(k, M85);
        assert!((depth / er - 17.5).abs() < 0.2, "U0/Er = {}", depth / er);
        assert!((well_frequency(depth, M85, k) / 32.2e3 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn light_shift_depth() {
        assert_eq!(depth_from_intensity(0.0, 1.0, 1.0, 1.0).unwrap(), 0.0);
        let u1 = depth_from_intensity(1e4, 2e9, RB85_D2_LINEWIDTH, RB85_D2_SATURATION_INTENSITY).unwrap();
        let u2 = depth_from_intensity(1e4, 4e9, RB85_D2_LINEWIDTH, RB85_D2_SATURATION_INTENSITY).unwrap();
        assert!((u1 / u2 - 2.0).abs() < 1e-14);
        assert!(depth_from_intensity(1e4, -2e9, RB85_D2_LINEWIDTH, 1.0).unwrap() < 0.0);
        assert!(depth_from_intensity(1.0, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn light_shift_inversion_for_reference_depth() {
        let spec = LatticeSpec::with_depth_in_recoils(780e-9, deg(49.6), 37.0, M85).unwrap();
        let detuning = TAU * 25e9;
        let i0 = intensity_for_depth(spec.depth(), detuning, RB85_D2_LINEWIDTH, RB85_D2_SATURATION_INTENSITY).unwrap();
        let u = depth_from_intensity(i0, detuning, RB85_D2_LINEWIDTH, RB85_D2_SATURATION_INTENSITY).unwrap();
        assert!((u / spec.depth() - 1.0).abs() < 1e-10);
        let back = intensity_for_depth(u, detuning, RB85_D2_LINEWIDTH, RB85_D2_SATURATION_INTENSITY).unwrap();
        assert!((back / i0 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn sixty_degree_shift() {
        let spec = LatticeSpec::with_depth_in_recoils(780e-9, deg(49.6), 17.5, M85).unwrap();
        let s = spec.shift_for_phase(deg(60.0));
        assert!((s.displacement() - 0.155e-6).abs() < 0.002e-6, "d = {}", s.displacement());
        assert!((s.displacement() / spec.period() - s.phase() / TAU).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn shift_is_linear_in_phase(a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let period = 0.93e-6;
            let sum = PotentialShift::from_phase(a + b, period).displacement();
            let parts = PotentialShift::from_phase(a, period).displacement() + PotentialShift::from_phase(b, period).displacement();
            prop_assert!((sum - parts).abs() <= 1e-15 * period * 8.0);
        }

        #[test]
        fn frequency_scales_with_root_depth(u in 1e-31f64..1e-28, f in 1.1f64..9.0) {
            let k = 3.38e6;
            let ratio = well_frequency(f * u, M85, k) / well_frequency(u, M85, k);
            prop_assert!((ratio - f.sqrt()).abs() < 1e-12);
        }
    }
}
