use rayon::prelude::*;

use crate::constants::HBAR;
use crate::quadrature::trapezoid;

use super::{wigner_point_parity, DensityMatrix, OscillatorSpec, PhasePoint};

/// A quasi-probability density sampled on a rectangular `(x, p)` grid, in
/// physical units. `values[i * ps.len() + j]` is the sample at `(xs[i], ps[j])`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSpaceGrid {
    pub xs: Vec<f64>,
    pub ps: Vec<f64>,
    pub values: Vec<f64>,
}

impl PhaseSpaceGrid {
    pub fn value(&self, ix: usize, ip: usize) -> f64 {
        self.values[ix * self.ps.len() + ip]
    }

    fn row(&self, ix: usize) -> &[f64] {
        let n = self.ps.len();
        &self.values[ix * n..(ix + 1) * n]
    }
}

/// Samples the physical Wigner density `W(x, p) = W̃(α)/ħ` on a grid via the
/// parity formula.
pub fn sample_wigner_grid(rho: &DensityMatrix, spec: &OscillatorSpec, xs: &[f64], ps: &[f64]) -> PhaseSpaceGrid {
    let values: Vec<f64> = xs
        .par_iter()
        .flat_map_iter(|&x| {
            ps.iter().map(move |&p| wigner_point_parity(rho, PhasePoint::from_physical(x, p, spec)) / HBAR)
        })
        .collect();
    PhaseSpaceGrid { xs: xs.to_vec(), ps: ps.to_vec(), values }
}

/// Position density obtained by integrating a Wigner grid over momentum.
#[derive(Debug, Clone, PartialEq)]
pub struct Marginal {
    pub xs: Vec<f64>,
    pub density: Vec<f64>,
    /// Estimated error of `∫P dx` from the finite momentum window and
    /// resolution.
    pub truncation_error: f64,
    pub warnings: Vec<String>,
}

const MIN_MOMENTUM_POINTS: usize = 64;
const MIN_MOMENTUM_SPAN: f64 = 5.0;
const TRUNCATION_WARNING: f64 = 1e-3;

/// `P(x) = ∫ W(x, p) dp` by the trapezoid rule.
///
/// The truncation estimate combines the half-resolution disagreement with the
/// mass sitting on the momentum edges; it is integrated over `x` so it can be
/// compared against the unit normalization.
pub fn marginal_x(grid: &PhaseSpaceGrid, spec: &OscillatorSpec) -> Marginal {
    let mut warnings = Vec::new();
    let ps = &grid.ps;
    let p_lo = ps.first().copied().unwrap_or(0.0);
    let p_hi = ps.last().copied().unwrap_or(0.0);
    if ps.len() < MIN_MOMENTUM_POINTS {
        warnings.push(format!("momentum grid has {} points, fewer than {MIN_MOMENTUM_POINTS}", ps.len()));
    }
    if p_lo > -MIN_MOMENTUM_SPAN * spec.p0() || p_hi < MIN_MOMENTUM_SPAN * spec.p0() {
        warnings.push(format!("momentum grid does not span ±{MIN_MOMENTUM_SPAN} p0"));
    }

    let coarse_ps: Vec<f64> = ps.iter().step_by(2).copied().collect();
    let mut density = Vec::with_capacity(grid.xs.len());
    let mut per_x_error = Vec::with_capacity(grid.xs.len());
    for ix in 0..grid.xs.len() {
        let row = grid.row(ix);
        let fine = trapezoid(ps, row);
        let coarse_vals: Vec<f64> = row.iter().step_by(2).copied().collect();
        let coarse = trapezoid(&coarse_ps, &coarse_vals);
        let dp = if ps.len() > 1 { (p_hi - p_lo) / (ps.len() - 1) as f64 } else { 0.0 };
        let edge = (row.first().map_or(0.0, |v| v.abs()) + row.last().map_or(0.0, |v| v.abs())) * dp;
        density.push(fine);
        per_x_error.push((fine - coarse).abs() / 3.0 + edge);
    }
    let truncation_error = if grid.xs.len() > 1 { trapezoid(&grid.xs, &per_x_error) } else { 0.0 };
    if truncation_error > TRUNCATION_WARNING {
        warnings.push(format!(
            "estimated marginal truncation error {truncation_error:.2e} exceeds {TRUNCATION_WARNING:.0e}"
        ));
    }
    Marginal { xs: grid.xs.clone(), density, truncation_error, warnings }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::ATOMIC_MASS_UNIT;
    use crate::quadrature::hermite_functions;
    use std::f64::consts::SQRT_2;

    fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
    }

    fn setup() -> (OscillatorSpec, Vec<f64>, Vec<f64>) {
        let spec = OscillatorSpec::new(85.0 * ATOMIC_MASS_UNIT, 48.33e3).unwrap();
        let xs = linspace(-7.0 * spec.x0(), 7.0 * spec.x0(), 57);
        let ps = linspace(-7.0 * spec.p0(), 7.0 * spec.p0(), 81);
        (spec, xs, ps)
    }

    #[test]
    fn vacuum_marginal_width() {
        let (spec, xs, ps) = setup();
        let vac = DensityMatrix::vacuum(4).unwrap();
        let m = marginal_x(&sample_wigner_grid(&vac, &spec, &xs, &ps), &spec);
        assert!(m.warnings.is_empty(), "{:?}", m.warnings);
        let norm = trapezoid(&m.xs, &m.density);
        assert!((norm - 1.0).abs() < 1e-3, "norm {norm}");
        let second: Vec<f64> = m.xs.iter().zip(&m.density).map(|(x, d)| x * x * d).collect();
        let rms = (trapezoid(&m.xs, &second) / norm).sqrt();
        assert!((rms / spec.x0() - 1.0).abs() < 0.01, "rms/x0 = {}", rms / spec.x0());
    }

    #[test]
    fn mixture_marginal_matches_hermite_densities() {
        let (spec, xs, ps) = setup();
        let rho = DensityMatrix::diagonal(&[0.3, 0.7]).unwrap();
        let m = marginal_x(&sample_wigner_grid(&rho, &spec, &xs, &ps), &spec);
        let norm = trapezoid(&m.xs, &m.density);
        assert!((norm - 1.0).abs() < 1e-3);
        let ell = SQRT_2 * spec.x0();
        for (x, d) in m.xs.iter().zip(&m.density) {
            let h = hermite_functions(x / ell, 2);
            let expected = (0.3 * h[0] * h[0] + 0.7 * h[1] * h[1]) / ell;
            // compare in units of the peak density 1/ℓ
            assert!((d - expected).abs() * ell < 1e-4, "x = {x}: {d} vs {expected}");
        }
    }

    #[test]
    fn narrow_grid_is_flagged() {
        let (spec, xs, _) = setup();
        let ps = linspace(-1.5 * spec.p0(), 1.5 * spec.p0(), 16);
        let vac = DensityMatrix::vacuum(2).unwrap();
        let m = marginal_x(&sample_wigner_grid(&vac, &spec, &xs, &ps), &spec);
        assert!(m.warnings.len() >= 2);
        assert!(m.truncation_error > 1e-3);
    }
}
