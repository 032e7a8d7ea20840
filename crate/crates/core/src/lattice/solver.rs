//! Finite-difference eigensolver for a single lattice well with hard walls
//! at the neighbouring barrier tops.
//!
//! The discretized Hamiltonian is a symmetric tridiagonal matrix, so the
//! lowest eigenvalues are isolated by Sturm-sequence bisection and the
//! eigenvectors recovered by inverse iteration.

use crate::{Error, Result};

use super::LatticeSpec;

pub const DEFAULT_GRID_SIZE: usize = 1024;
const MIN_GRID_SIZE: usize = 256;

/// Eigenstates of one well, ascending in energy. Energies are measured from
/// the well bottom, in joules; wavefunctions are sampled on the interior grid
/// points and normalized so that `Σ ψ² dx = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundStateBasis {
    pub energies: Vec<f64>,
    pub wavefunctions: Vec<Vec<f64>>,
    pub grid: Vec<f64>,
    pub spacing: f64,
    /// Number of states strictly below the barrier top `U₀`.
    pub bound_count: usize,
}

impl BoundStateBasis {
    /// A basis carrying only a spectrum, e.g. the harmonic ladder
    /// `ħω(n + ½)`; used to drive [`evolve_in_well`](super::evolve_in_well)
    /// without wavefunctions.
    pub fn from_energies(energies: Vec<f64>, barrier: f64) -> Self {
        let bound_count = energies.iter().filter(|e| **e < barrier).count();
        BoundStateBasis { energies, wavefunctions: Vec::new(), grid: Vec::new(), spacing: 0.0, bound_count }
    }

    pub fn harmonic(omega: f64, count: usize) -> Self {
        let hbar = crate::constants::HBAR;
        let energies = (0..count).map(|n| hbar * omega * (n as f64 + 0.5)).collect();
        BoundStateBasis::from_energies(energies, f64::INFINITY)
    }

    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    pub fn overlap(&self, i: usize, j: usize) -> f64 {
        self.wavefunctions[i].iter().zip(&self.wavefunctions[j]).map(|(a, b)| a * b).sum::<f64>() * self.spacing
    }

    /// Basis restricted to its bound states.
    pub fn bound_only(&self) -> BoundStateBasis {
        let n = self.bound_count;
        BoundStateBasis {
            energies: self.energies[..n].to_vec(),
            wavefunctions: self.wavefunctions.iter().take(n).cloned().collect(),
            grid: self.grid.clone(),
            spacing: self.spacing,
            bound_count: n,
        }
    }
}

/// Bound states (energy below `U₀`) of the well.
pub fn solve_bound_states(spec: &LatticeSpec, grid_size: usize) -> Result<BoundStateBasis> {
    let full = solve_well_states(spec, grid_size, 0)?;
    Ok(full.bound_only())
}

/// The lowest `max(count, bound_count)` states of the well, including the
/// discretized continuum above the barrier when `count` exceeds the number
/// of bound states.
pub fn solve_well_states(spec: &LatticeSpec, grid_size: usize, count: usize) -> Result<BoundStateBasis> {
    solve_well_states_shifted(spec, grid_size, count, 0.0)
}

pub(crate) fn solve_well_states_shifted(
    spec: &LatticeSpec,
    grid_size: usize,
    count: usize,
    shift: f64,
) -> Result<BoundStateBasis> {
    if grid_size < MIN_GRID_SIZE {
        return Err(Error::param("grid_size", format!("need at least {MIN_GRID_SIZE} points, got {grid_size}")));
    }
    let a = spec.period();
    let h = a / (grid_size + 1) as f64;
    let grid: Vec<f64> = (0..grid_size).map(|i| -0.5 * a + (i + 1) as f64 * h).collect();

    // work in recoil units for conditioning
    let er = spec.recoil_energy();
    let kh = spec.k_l() * h;
    let off = -1.0 / (kh * kh);
    let diag: Vec<f64> = grid.iter().map(|&x| 2.0 / (kh * kh) + spec.potential(x, shift) / er).collect();
    let tri = Tridiagonal { diag, off };

    let barrier = spec.depth() / er;
    let bound_count = tri.count_below(barrier);
    let wanted = count.max(bound_count).min(grid_size);

    let mut energies = Vec::with_capacity(wanted);
    let mut wavefunctions: Vec<Vec<f64>> = Vec::with_capacity(wanted);
    for k in 0..wanted {
        let lambda = tri.eigenvalue(k);
        let mut v = tri.inverse_iteration(lambda, k)?;
        for prev in &wavefunctions {
            // stored vectors carry the Σψ²h = 1 normalization
            let dot: f64 = prev.iter().zip(&v).map(|(p, q)| p * q).sum::<f64>() * h;
            for (q, p) in v.iter_mut().zip(prev) {
                *q -= dot * p;
            }
        }
        let norm = v.iter().map(|q| q * q).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::NumericalFailure(format!("eigenvector {k} collapsed during orthogonalization")));
        }
        // sign convention: first significant lobe positive
        let peak = v.iter().fold(0.0f64, |m, q| m.max(q.abs()));
        let first = v.iter().find(|q| q.abs() > 1e-3 * peak).copied().unwrap_or(1.0);
        let scale = first.signum() / (norm * h.sqrt());
        v.iter_mut().for_each(|q| *q *= scale);
        energies.push(lambda * er);
        wavefunctions.push(v);
    }
    Ok(BoundStateBasis { energies, wavefunctions, grid, spacing: h, bound_count })
}

struct Tridiagonal {
    diag: Vec<f64>,
    /// constant off-diagonal element
    off: f64,
}

impl Tridiagonal {
    /// Number of eigenvalues strictly below `x` (Sturm sequence count).
    fn count_below(&self, x: f64) -> usize {
        let e2 = self.off * self.off;
        let mut count = 0;
        let mut q = 1.0;
        for (i, &d) in self.diag.iter().enumerate() {
            q = if i == 0 { d - x } else { d - x - e2 / q };
            if q == 0.0 {
                q = -f64::EPSILON * (d.abs() + self.off.abs());
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// The `k`-th smallest eigenvalue by bisection on the Gershgorin interval.
    fn eigenvalue(&self, k: usize) -> f64 {
        let r = 2.0 * self.off.abs();
        let mut lo = self.diag.iter().fold(f64::INFINITY, |m, &d| m.min(d - r));
        let mut hi = self.diag.iter().fold(f64::NEG_INFINITY, |m, &d| m.max(d + r));
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    fn inverse_iteration(&self, lambda: f64, k: usize) -> Result<Vec<f64>> {
        let n = self.diag.len();
        // deterministic start vector with overlap on every eigenvector
        let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * ((i * 7 + k * 13) % 17) as f64).collect();
        let shift = lambda + 1e-10 * (1.0 + lambda.abs());
        for _ in 0..4 {
            v = self.solve_shifted(shift, &v)?;
            let norm = v.iter().map(|q| q * q).sum::<f64>().sqrt();
            if !norm.is_finite() || norm == 0.0 {
                return Err(Error::NumericalFailure(format!("inverse iteration diverged for eigenvalue {k}")));
            }
            v.iter_mut().for_each(|q| *q /= norm);
        }
        Ok(v)
    }

    /// Solves `(T − σ I) y = b` by the Thomas algorithm, replacing vanishing
    /// pivots by a tiny value as is customary for inverse iteration.
    fn solve_shifted(&self, sigma: f64, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.diag.len();
        let tiny = f64::EPSILON * (self.off.abs() + 1.0);
        let mut c = vec![0.0; n];
        let mut y = vec![0.0; n];
        let mut piv = self.diag[0] - sigma;
        if piv.abs() < tiny {
            piv = tiny;
        }
        c[0] = self.off / piv;
        y[0] = b[0] / piv;
        for i in 1..n {
            let mut p = self.diag[i] - sigma - self.off * c[i - 1];
            if p.abs() < tiny {
                p = tiny;
            }
            c[i] = self.off / p;
            y[i] = (b[i] - self.off * y[i - 1]) / p;
        }
        for i in (0..n - 1).rev() {
            y[i] -= c[i] * y[i + 1];
        }
        if y.iter().any(|q| !q.is_finite()) {
            return Err(Error::NumericalFailure("tridiagonal solve produced non-finite values".into()));
        }
        Ok(y)
    }
}
