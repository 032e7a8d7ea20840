use nalgebra::DMatrix;

use crate::constants::HBAR;
use crate::oscillator::operators::expm_neg_i_hermitian;
use crate::{Error, Result, C64};

use super::solver::solve_well_states_shifted;
use super::{BoundStateBasis, LatticeSpec, PotentialShift};

/// Free evolution in the well eigenbasis: coefficient `n` picks up
/// `e^{−iEₙt/ħ}`.
pub fn evolve_in_well(coefficients: &[C64], basis: &BoundStateBasis, t: f64) -> Result<Vec<C64>> {
    if !(t >= 0.0) {
        return Err(Error::param("t", format!("evolution time must be non-negative, got {t}")));
    }
    if coefficients.len() > basis.len() {
        return Err(Error::param(
            "coefficients",
            format!("{} coefficients for a basis of {} states", coefficients.len(), basis.len()),
        ));
    }
    Ok(coefficients.iter().zip(&basis.energies).map(|(c, e)| c * C64::from_polar(1.0, -e * t / HBAR)).collect())
}

/// Hamiltonian of the shifted lattice, `p²/2m + U₀ sin²(k_L(x − d))`,
/// projected onto the states of an unshifted-well basis.
#[derive(Debug, Clone)]
pub struct ShiftedHamiltonian {
    /// Matrix elements in joules.
    pub matrix: DMatrix<C64>,
    pub shift: PotentialShift,
    /// Weight of the unshifted ground state outside the bound subspace of
    /// the shifted well, estimated within the projected basis.
    pub ground_leakage: f64,
}

impl ShiftedHamiltonian {
    /// `exp(−iHt/ħ)` in the projected basis.
    pub fn propagator(&self, t: f64) -> DMatrix<C64> {
        expm_neg_i_hermitian(self.matrix.scale(t / HBAR))
    }
}

/// Matrix elements `⟨ψᵢ| p²/2m + U₀ sin²(k_L(x − d)) |ψⱼ⟩` over `basis`.
///
/// The kinetic term is diagonal in the grid eigenbasis, so only the change
/// of potential needs integrating: `Eᵢδᵢⱼ + Σₓ ψᵢ (V_d − V₀) ψⱼ dx`.
pub fn shifted_hamiltonian_matrix(
    spec: &LatticeSpec,
    basis: &BoundStateBasis,
    shift: PotentialShift,
) -> Result<ShiftedHamiltonian> {
    let d = shift.displacement();
    if !(d.abs() < spec.period()) {
        return Err(Error::param("shift", format!("|d| = {d:e} must be below the period {:e}", spec.period())));
    }
    if basis.wavefunctions.len() != basis.len() || basis.grid.is_empty() {
        return Err(Error::param("basis", "shifted matrix elements need sampled wavefunctions"));
    }
    let n = basis.len();
    let delta_v: Vec<f64> = basis.grid.iter().map(|&x| spec.potential(x, d) - spec.potential(x, 0.0)).collect();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let mut acc = 0.0;
            for (k, dv) in delta_v.iter().enumerate() {
                acc += basis.wavefunctions[i][k] * dv * basis.wavefunctions[j][k];
            }
            let mut v = acc * basis.spacing;
            if i == j {
                v += basis.energies[i];
            }
            m[(i, j)] = C64::new(v, 0.0);
            m[(j, i)] = C64::new(v, 0.0);
        }
    }

    let eig = nalgebra::SymmetricEigen::new(m.map(|z| z.re));
    let mut kept = 0.0;
    for (k, e) in eig.eigenvalues.iter().enumerate() {
        if *e < spec.depth() {
            kept += eig.eigenvectors[(0, k)].powi(2);
        }
    }
    Ok(ShiftedHamiltonian { matrix: m, shift, ground_leakage: (1.0 - kept).max(0.0) })
}

/// Bound states of the shifted well solved directly on the grid.
pub fn shifted_bound_states(spec: &LatticeSpec, grid_size: usize, shift: PotentialShift) -> Result<BoundStateBasis> {
    Ok(solve_well_states_shifted(spec, grid_size, 0, shift.displacement())?.bound_only())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::ATOMIC_MASS_UNIT;
    use crate::lattice::{solve_well_states, DEFAULT_GRID_SIZE};
    use crate::oscillator::{rotation_matrix, FockVector};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    const M85: f64 = 85.0 * ATOMIC_MASS_UNIT;

    fn lattice(depth_er: f64) -> LatticeSpec {
        LatticeSpec::with_depth_in_recoils(780e-9, 49.6 * PI / 180.0, depth_er, M85).unwrap()
    }

    fn coeffs() -> Vec<C64> {
        let v = vec![C64::new(0.5, 0.1), C64::new(-0.3, 0.4), C64::new(0.2, -0.6), C64::new(0.1, 0.2)];
        let n: f64 = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        v.into_iter().map(|c| c / n).collect()
    }

    #[test]
    fn zero_time_is_identity() {
        let basis = BoundStateBasis::harmonic(3e4, 4);
        assert_eq!(evolve_in_well(&coeffs(), &basis, 0.0).unwrap(), coeffs());
        assert!(evolve_in_well(&coeffs(), &basis, -1.0).is_err());
    }

    #[test]
    fn eigenstate_only_acquires_phase() {
        let basis = BoundStateBasis::harmonic(3e4, 4);
        let mut c = vec![C64::new(0.0, 0.0); 4];
        c[2] = C64::new(1.0, 0.0);
        let out = evolve_in_well(&c, &basis, 1.234e-5).unwrap();
        assert!((out[2].norm() - 1.0).abs() < 1e-15);
        assert!(out.iter().enumerate().all(|(k, z)| k == 2 || z.norm() == 0.0));
    }

    #[test]
    fn harmonic_spectrum_reproduces_rotation() {
        let omega = 4.8e4;
        let t = 2.0e-5;
        let basis = BoundStateBasis::harmonic(omega, 4);
        let evolved = evolve_in_well(&coeffs(), &basis, t).unwrap();
        let rotated = FockVector::new(coeffs()).unwrap().apply(&rotation_matrix(omega * t, 4).unwrap());
        let global = C64::from_polar(1.0, -0.5 * omega * t);
        for (n, e) in evolved.iter().enumerate() {
            assert!((e - global * rotated.amplitude(n)).norm() < 1e-12);
        }
    }

    #[test]
    fn unshifted_matrix_is_diagonal() {
        let spec = lattice(17.5);
        let basis = solve_well_states(&spec, DEFAULT_GRID_SIZE, 8).unwrap();
        let h = shifted_hamiltonian_matrix(&spec, &basis, PotentialShift::none()).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                let expected = if i == j { basis.energies[i] } else { 0.0 };
                assert!((h.matrix[(i, j)].re - expected).abs() < 1e-8 * spec.recoil_energy());
            }
        }
        assert!(h.ground_leakage < 1e-12);
    }

    #[test]
    fn shifted_matrix_hermitian_with_leakage() {
        let spec = lattice(17.5);
        let basis = solve_well_states(&spec, DEFAULT_GRID_SIZE, 24).unwrap();
        let shift = PotentialShift::from_displacement(0.155e-6, spec.period());
        let h = shifted_hamiltonian_matrix(&spec, &basis, shift).unwrap();
        let herm = (&h.matrix - h.matrix.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(herm <= 1e-12 * spec.depth());

        // oracle: overlaps with the shifted well's own bound states on the grid
        let shifted = shifted_bound_states(&spec, DEFAULT_GRID_SIZE, shift).unwrap();
        let kept: f64 = (0..shifted.bound_count)
            .map(|i| {
                let o: f64 = shifted.wavefunctions[i].iter().zip(&basis.wavefunctions[0]).map(|(a, b)| a * b).sum();
                (o * basis.spacing).powi(2)
            })
            .sum();
        let leakage = 1.0 - kept;
        assert!(leakage > 0.0 && kept < 1.0, "direct leakage {leakage}");
        assert!(h.ground_leakage > 0.0);
        assert!((h.ground_leakage - leakage).abs() < 0.02, "{} vs {leakage}", h.ground_leakage);
    }

    #[test]
    fn shift_range_checked() {
        let spec = lattice(17.5);
        let basis = solve_well_states(&spec, DEFAULT_GRID_SIZE, 4).unwrap();
        let shift = PotentialShift::from_displacement(1.5 * spec.period(), spec.period());
        assert!(shifted_hamiltonian_matrix(&spec, &basis, shift).is_err());
    }

    proptest! {
        #[test]
        fn evolution_composes_and_preserves_norm(t1 in 0.0f64..2e-4, t2 in 0.0f64..2e-4) {
            let spec = BoundStateBasis::from_energies(vec![1.1e-30, 3.4e-30, 5.2e-30, 6.6e-30], f64::INFINITY);
            let c = coeffs();
            let two = evolve_in_well(&evolve_in_well(&c, &spec, t1).unwrap(), &spec, t2).unwrap();
            let one = evolve_in_well(&c, &spec, t1 + t2).unwrap();
            for (a, b) in two.iter().zip(&one) {
                prop_assert!((a - b).norm() < 1e-12);
            }
            let norm: f64 = one.iter().map(|z| z.norm_sqr()).sum();
            prop_assert!((norm - 1.0).abs() < 1e-14);
        }
    }
}
