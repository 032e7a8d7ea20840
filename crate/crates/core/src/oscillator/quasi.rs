use std::f64::consts::{PI, SQRT_2};

use crate::quadrature::{hermite_functions, GaussLegendre};
use crate::{Error, Result, C64};

use super::operators::{working_dimension, DisplacementKernel};
use super::{make_coherent, DensityMatrix, OscillatorSpec, PhasePoint};

/// `Q(α) = ⟨α|ρ|α⟩/π`.
///
/// The coherent state is expanded directly in ρ's basis, so the value is
/// exact for the truncated ρ and never involves a displacement operator.
pub fn husimi_point(rho: &DensityMatrix, point: PhasePoint) -> f64 {
    let coh = make_coherent(point.alpha, rho.dim()).expect("density matrices are non-empty");
    rho.expectation_pure(&coh) / PI
}

/// Populations `p(n|α) = ⟨n|D†(α) ρ D(α)|n⟩` over the working basis
/// `dim + ⌈4|α|² + 8⌉`.
pub fn displaced_populations(rho: &DensityMatrix, alpha: C64) -> Vec<f64> {
    let work = working_dimension(rho.dim(), alpha.norm());
    let kernel = DisplacementKernel::new(work).expect("working dimension is positive");
    populations_with_kernel(rho, &kernel, alpha)
}

pub(crate) fn populations_with_kernel(rho: &DensityMatrix, kernel: &DisplacementKernel, alpha: C64) -> Vec<f64> {
    let d = kernel.matrix(alpha);
    let n = rho.dim();
    let work = kernel.dim();
    let m = rho.matrix();
    // only the first n rows of D touch ρ
    let top = d.view((0, 0), (n, work));
    let b = m * top;
    (0..work)
        .map(|col| {
            let mut acc = C64::new(0.0, 0.0);
            for i in 0..n {
                acc += top[(i, col)].conj() * b[(i, col)];
            }
            acc.re
        })
        .collect()
}

/// Parity-formula Wigner value `Σₙ (−1)ⁿ p(n|α) / π`.
pub fn wigner_point_parity(rho: &DensityMatrix, point: PhasePoint) -> f64 {
    parity_sum(&displaced_populations(rho, point.alpha)) / PI
}

pub(crate) fn parity_sum(populations: &[f64]) -> f64 {
    populations.iter().enumerate().map(|(n, p)| if n % 2 == 0 { *p } else { -*p }).sum()
}

/// Settings for the position-space Wigner integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WignerQuadrature {
    /// Gauss–Legendre nodes for the first pass; the refinement doubles it.
    pub nodes: usize,
    /// Half-width of the integration window in units of √(ħ/mω); `None`
    /// picks `√(2N+1) + 8` from the basis size.
    pub half_width: Option<f64>,
    /// Maximum allowed disagreement between the two passes.
    pub tolerance: f64,
}

impl Default for WignerQuadrature {
    fn default() -> Self {
        WignerQuadrature { nodes: 256, half_width: None, tolerance: 1e-6 }
    }
}

/// Wigner value from the integral definition
/// `W = (1/π) ∫ ⟨x+q|ρ|x−q⟩ e^{−2ipq/ħ} dq`, scaled to the same dimensionless
/// convention as [`wigner_point_parity`].
pub fn wigner_point_integral(rho: &DensityMatrix, x: f64, p: f64, spec: &OscillatorSpec) -> Result<f64> {
    wigner_point_integral_with(rho, x, p, spec, &WignerQuadrature::default())
}

pub fn wigner_point_integral_with(
    rho: &DensityMatrix,
    x: f64,
    p: f64,
    spec: &OscillatorSpec,
    quad: &WignerQuadrature,
) -> Result<f64> {
    // natural units ℓ = √(ħ/mω) = √2·x0, momentum unit ħ/ℓ = √2·p0
    let xi = x / (SQRT_2 * spec.x0());
    let eta = p / (SQRT_2 * spec.p0());
    let dim = rho.dim();
    let half = quad.half_width.unwrap_or(((2 * dim + 1) as f64).sqrt() + 8.0);
    let coarse = integrate_wigner(rho, xi, eta, half, quad.nodes);
    let fine = integrate_wigner(rho, xi, eta, half, 2 * quad.nodes);
    if (coarse - fine).abs() > quad.tolerance || !fine.is_finite() {
        return Err(Error::NumericalFailure(format!(
            "Wigner quadrature did not converge at (x, p) = ({x:.3e}, {p:.3e}): {coarse:.9} vs {fine:.9}"
        )));
    }
    Ok(fine)
}

fn integrate_wigner(rho: &DensityMatrix, xi: f64, eta: f64, half: f64, nodes: usize) -> f64 {
    let rule = GaussLegendre::new(nodes);
    let dim = rho.dim();
    let m = rho.matrix();
    let mut total = 0.0;
    for (q, w) in rule.on_interval(-half, half) {
        let plus = hermite_functions(xi + q, dim);
        let minus = hermite_functions(xi - q, dim);
        let mut kernel = C64::new(0.0, 0.0);
        for i in 0..dim {
            if plus[i] == 0.0 {
                continue;
            }
            let mut row = C64::new(0.0, 0.0);
            for j in 0..dim {
                row += m[(i, j)] * minus[j];
            }
            kernel += row * plus[i];
        }
        total += w * (kernel * C64::from_polar(1.0, -2.0 * eta * q)).re;
    }
    total / PI
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::ATOMIC_MASS_UNIT;
    use crate::oscillator::FockVector;

    fn spec() -> OscillatorSpec {
        OscillatorSpec::new(85.0 * ATOMIC_MASS_UNIT, 48.33e3).unwrap()
    }

    #[test]
    fn husimi_of_vacuum() {
        let vac = DensityMatrix::vacuum(8).unwrap();
        assert!((husimi_point(&vac, PhasePoint::from_polar(0.0, 0.0)) - 1.0 / PI).abs() < 1e-15);
        let q = husimi_point(&vac, PhasePoint::from_polar(1.0, 0.7));
        assert!((q - (-1.0f64).exp() / PI).abs() < 1e-15);
    }

    #[test]
    fn husimi_of_contaminated_ground() {
        let rho = DensityMatrix::diagonal(&[0.84, 0.16]).unwrap();
        let q = husimi_point(&rho, PhasePoint::from_polar(0.0, 0.0));
        assert!((q - 0.84 / PI).abs() < 1e-15);
        assert!((q - 0.267).abs() < 5e-4);
    }

    #[test]
    fn wigner_parity_values() {
        let vac = DensityMatrix::vacuum(8).unwrap();
        assert!((wigner_point_parity(&vac, PhasePoint::from_polar(0.0, 0.0)) - 1.0 / PI).abs() < 1e-14);
        let inv = DensityMatrix::diagonal(&[0.3, 0.7]).unwrap();
        let w0 = wigner_point_parity(&inv, PhasePoint::from_polar(0.0, 0.0));
        assert!((w0 + 0.4 / PI).abs() < 1e-14);
        assert!((w0 - (-0.12)).abs() < 0.01);
        for &(r, th) in &[(0.3, 0.0), (1.0, 1.0), (2.2, -2.0), (3.0, 0.5)] {
            let pt = PhasePoint::from_polar(r, th);
            let analytic = (-2.0 * r * r).exp() / PI;
            assert!((wigner_point_parity(&vac, pt) - analytic).abs() < 1e-10);
        }
    }

    #[test]
    fn wigner_integral_basic_values() {
        let s = spec();
        let vac = DensityMatrix::vacuum(4).unwrap();
        assert!((wigner_point_integral(&vac, 0.0, 0.0, &s).unwrap() - 1.0 / PI).abs() < 1e-6);
        let one = FockVector::number_state(1, 4).unwrap().to_density_matrix();
        assert!((wigner_point_integral(&one, 0.0, 0.0, &s).unwrap() + 1.0 / PI).abs() < 1e-6);
    }

    #[test]
    fn integral_agrees_with_parity_off_origin() {
        let s = spec();
        let rho =
            FockVector::new(vec![C64::new(0.6, 0.0), C64::new(0.0, 0.5), C64::new(-0.3, 0.2), C64::new(0.1, 0.1)])
                .unwrap()
                .normalized()
                .to_density_matrix();
        for &(a, b) in &[(0.5, -0.3), (-1.2, 0.8), (2.0, 1.5)] {
            let pt = PhasePoint::new(C64::new(a, b));
            let (x, p) = pt.to_physical(&s);
            let integral = wigner_point_integral(&rho, x, p, &s).unwrap();
            let parity = wigner_point_parity(&rho, pt);
            assert!((integral - parity).abs() < 1e-6, "{integral} vs {parity}");
        }
    }

    #[test]
    fn under_resolved_quadrature_is_reported() {
        let s = spec();
        let rho = FockVector::number_state(3, 4).unwrap().to_density_matrix();
        let quad = WignerQuadrature { nodes: 4, half_width: Some(12.0), tolerance: 1e-6 };
        let pt = PhasePoint::new(C64::new(0.4, 2.5));
        let (x, p) = pt.to_physical(&s);
        assert!(matches!(wigner_point_integral_with(&rho, x, p, &s, &quad), Err(Error::NumericalFailure(_))));
    }
}
