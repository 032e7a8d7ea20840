use serde::{Deserialize, Serialize};

use crate::constants::HBAR;
use crate::{Error, Result, C64};

/// Harmonic oscillator parameters bridging dimensionless phase-space
/// coordinates and physical units.
///
/// `x0 = √(ħ/2mω)` and `p0 = √(mħω/2)` are derived on construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OscillatorSpec {
    mass: f64,
    omega: f64,
    x0: f64,
    p0: f64,
}

impl OscillatorSpec {
    pub fn new(mass: f64, omega: f64) -> Result<Self> {
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(Error::param("mass", format!("must be positive, got {mass}")));
        }
        if !(omega > 0.0) || !omega.is_finite() {
            return Err(Error::param("omega", format!("must be positive, got {omega}")));
        }
        Ok(OscillatorSpec {
            mass,
            omega,
            x0: (HBAR / (2.0 * mass * omega)).sqrt(),
            p0: (mass * HBAR * omega / 2.0).sqrt(),
        })
    }

    /// Oscillator whose ground-state position width is `x0`.
    pub fn from_ground_width(mass: f64, x0: f64) -> Result<Self> {
        if !(x0 > 0.0) {
            return Err(Error::param("x0", format!("must be positive, got {x0}")));
        }
        OscillatorSpec::new(mass, HBAR / (2.0 * mass * x0 * x0))
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn p0(&self) -> f64 {
        self.p0
    }

    /// Oscillation period 2π/ω, s.
    pub fn period(&self) -> f64 {
        std::f64::consts::TAU / self.omega
    }

    /// `|α|` reached by a physical displacement `x` (`x = 2x₀|α|`).
    pub fn alpha_for_displacement(&self, x: f64) -> f64 {
        x / (2.0 * self.x0)
    }

    /// Phase-space rotation accumulated by free evolution for time `t`.
    pub fn rotation_angle(&self, t: f64) -> f64 {
        self.omega * t
    }
}

/// A point of phase space, stored as the complex amplitude α.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub alpha: C64,
}

impl PhasePoint {
    pub fn new(alpha: C64) -> Self {
        PhasePoint { alpha }
    }

    /// `α = r e^{iθ}`.
    pub fn from_polar(magnitude: f64, angle: f64) -> Self {
        PhasePoint { alpha: C64::from_polar(magnitude, angle) }
    }

    /// From physical position and momentum: `α = x/2x₀ + i p/2p₀`.
    pub fn from_physical(x: f64, p: f64, spec: &OscillatorSpec) -> Self {
        PhasePoint { alpha: C64::new(x / (2.0 * spec.x0()), p / (2.0 * spec.p0())) }
    }

    /// `(x, p) = (2x₀ Re α, 2p₀ Im α)`.
    pub fn to_physical(&self, spec: &OscillatorSpec) -> (f64, f64) {
        (2.0 * spec.x0() * self.alpha.re, 2.0 * spec.p0() * self.alpha.im)
    }

    pub fn magnitude(&self) -> f64 {
        self.alpha.norm()
    }

    pub fn angle(&self) -> f64 {
        self.alpha.arg()
    }
}

impl From<C64> for PhasePoint {
    fn from(alpha: C64) -> Self {
        PhasePoint { alpha }
    }
}
