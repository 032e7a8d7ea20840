use serde::{Deserialize, Serialize};

use crate::constants::HBAR;
use crate::oscillator::DensityMatrix;
use crate::quadrature::GaussLegendre;
use crate::{Error, Result, C64};

/// Shape of the well-to-well frequency distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpreadShape {
    /// Normal distribution of standard deviation `Δω`, truncated at
    /// `±truncation·Δω` and renormalized.
    Gaussian { truncation: f64 },
    /// Equal weights at `ω̄ ± Δω`.
    TwoPoint,
    /// Uniform on `ω̄(1 ± √3·Δω/ω̄)`, i.e. standard deviation `Δω`.
    Uniform,
}

impl Default for SpreadShape {
    fn default() -> Self {
        SpreadShape::Gaussian { truncation: DEFAULT_TRUNCATION }
    }
}

/// Default Gaussian truncation in standard deviations. At `Δω/ω = 0.4` a
/// ±3σ cut would reach negative frequencies; ±2σ keeps the support positive
/// up to `Δω/ω < 0.5`.
pub const DEFAULT_TRUNCATION: f64 = 2.0;

pub const DEFAULT_SAMPLE_COUNT: usize = 512;

/// Inhomogeneous distribution of well frequencies across the lattice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DephasingModel {
    pub mean_omega: f64,
    /// `Δω/ω̄`.
    pub relative_spread: f64,
    pub shape: SpreadShape,
    pub sample_count: usize,
}

impl DephasingModel {
    pub fn gaussian(mean_omega: f64, relative_spread: f64) -> Self {
        DephasingModel {
            mean_omega,
            relative_spread,
            shape: SpreadShape::default(),
            sample_count: DEFAULT_SAMPLE_COUNT,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mean_omega > 0.0) || !self.mean_omega.is_finite() {
            return Err(Error::param("mean_omega", "must be positive"));
        }
        if !(self.relative_spread >= 0.0) || !self.relative_spread.is_finite() {
            return Err(Error::param("relative_spread", "must be non-negative"));
        }
        if self.sample_count == 0 {
            return Err(Error::param("sample_count", "need at least one sample"));
        }
        let reach = match self.shape {
            SpreadShape::Gaussian { truncation } => {
                if !(truncation > 0.0) {
                    return Err(Error::param("truncation", "must be positive"));
                }
                truncation * self.relative_spread
            }
            SpreadShape::TwoPoint => self.relative_spread,
            SpreadShape::Uniform => 3f64.sqrt() * self.relative_spread,
        };
        if reach >= 1.0 {
            return Err(Error::param(
                "relative_spread",
                format!("distribution reaches ω ≤ 0 (lowest frequency {:.3}·ω̄)", 1.0 - reach),
            ));
        }
        Ok(())
    }

    /// Discrete `(ωₖ, wₖ)` representation with weights summing to one.
    pub fn samples(&self) -> Result<Vec<(f64, f64)>> {
        self.validate()?;
        let w0 = self.mean_omega;
        let s = self.relative_spread;
        if s == 0.0 {
            return Ok(vec![(w0, 1.0)]);
        }
        let raw: Vec<(f64, f64)> = match self.shape {
            SpreadShape::TwoPoint => vec![(w0 * (1.0 - s), 0.5), (w0 * (1.0 + s), 0.5)],
            SpreadShape::Gaussian { truncation } => {
                if self.sample_count == 1 {
                    vec![(w0, 1.0)]
                } else {
                    let rule = GaussLegendre::new(self.sample_count);
                    rule.on_interval(-truncation, truncation)
                        .map(|(z, w)| (w0 * (1.0 + s * z), w * (-0.5 * z * z).exp()))
                        .collect()
                }
            }
            SpreadShape::Uniform => {
                let half = 3f64.sqrt() * s;
                let rule = GaussLegendre::new(self.sample_count);
                rule.on_interval(-half, half).map(|(z, w)| (w0 * (1.0 + z), w)).collect()
            }
        };
        let total: f64 = raw.iter().map(|(_, w)| w).sum();
        Ok(raw.into_iter().map(|(o, w)| (o, w / total)).collect())
    }

    /// `Σₖ wₖ e^{−iωₖτ}`.
    pub fn characteristic(&self, tau: f64) -> Result<C64> {
        Ok(self.samples()?.iter().map(|(o, w)| C64::from_polar(*w, -o * tau)).sum())
    }
}

/// Ensemble average of harmonic free evolution over the frequency
/// distribution: coherence `(m, n)` is multiplied by the characteristic
/// function at `(m − n)t`, populations are untouched.
pub fn dephase(rho: &DensityMatrix, model: &DephasingModel, t: f64) -> Result<DensityMatrix> {
    if !(t >= 0.0) {
        return Err(Error::param("t", "dephasing time must be non-negative"));
    }
    let samples = model.samples()?;
    let dim = rho.dim();
    let factors: Vec<C64> =
        (0..dim).map(|k| samples.iter().map(|(o, w)| C64::from_polar(*w, -(k as f64) * o * t)).sum()).collect();
    let m = rho.matrix();
    let out = nalgebra::DMatrix::from_fn(dim, dim, |i, j| {
        if i == j {
            m[(i, j)]
        } else if i > j {
            m[(i, j)] * factors[i - j]
        } else {
            m[(i, j)] * factors[j - i].conj()
        }
    });
    Ok(DensityMatrix::from_matrix_unchecked(out))
}

/// Ground-state width ratio of the ensemble, `x_rms/x₀ = √(⟨1/ω⟩ ω̄)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WidthRatio {
    /// Numerical average over the model's distribution.
    pub numeric: f64,
    /// `√(1 + s² + s⁴)` with `s = Δω/ω̄`, the truncated series estimate.
    pub series: f64,
}

pub fn inhomogeneous_width_ratio(model: &DephasingModel) -> Result<WidthRatio> {
    let s = model.relative_spread;
    if s >= 1.0 {
        return Err(Error::param("relative_spread", "series regime needs Δω/ω < 1"));
    }
    let samples = model.samples()?;
    let mean_inv: f64 = samples.iter().map(|(o, w)| w / o).sum();
    Ok(WidthRatio { numeric: (mean_inv * model.mean_omega).sqrt(), series: (1.0 + s * s + s.powi(4)).sqrt() })
}

/// Ground width `√(ħ/2m·⟨1/ω⟩)` of the ensemble.
pub fn ensemble_ground_width(model: &DephasingModel, mass: f64) -> Result<f64> {
    let samples = model.samples()?;
    let mean_inv: f64 = samples.iter().map(|(o, w)| w / o).sum();
    Ok((HBAR / (2.0 * mass) * mean_inv).sqrt())
}
