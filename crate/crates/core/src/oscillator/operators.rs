use std::f64::consts::FRAC_PI_2;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::{Error, Result, C64};

/// Working dimension used whenever a state of dimension `dim` is displaced by
/// `|α|`: a guard band of `⌈4|α|² + 6|α| + 8⌉` levels above the state's
/// support. The `6|α|` term is needed to bring parity sums of displaced
/// excited states below 1e−10 at moderate `|α|`.
pub fn working_dimension(dim: usize, alpha_magnitude: f64) -> usize {
    let a = alpha_magnitude;
    dim + (4.0 * a * a + 6.0 * a + 8.0).ceil() as usize
}

/// Truncated annihilation operator `a`, with `a|n⟩ = √n |n−1⟩`.
pub fn lowering_operator(dim: usize) -> Result<DMatrix<C64>> {
    check_dim(dim)?;
    Ok(DMatrix::from_fn(
        dim,
        dim,
        |i, j| {
            if j == i + 1 {
                C64::new((j as f64).sqrt(), 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        },
    ))
}

pub fn number_operator(dim: usize) -> Result<DMatrix<C64>> {
    check_dim(dim)?;
    Ok(DMatrix::from_fn(dim, dim, |i, j| if i == j { C64::new(i as f64, 0.0) } else { C64::new(0.0, 0.0) }))
}

/// Diagonal of `R(θ) = exp(−i θ a†a)`.
pub fn rotation_phases(theta: f64, dim: usize) -> Vec<C64> {
    (0..dim).map(|n| C64::from_polar(1.0, -(n as f64) * theta)).collect()
}

/// `R(θ) = exp(−i θ a†a)`; the generator has no zero-point term, so
/// `R(2π)` is exactly the identity.
pub fn rotation_matrix(theta: f64, dim: usize) -> Result<DMatrix<C64>> {
    check_dim(dim)?;
    let phases = rotation_phases(theta, dim);
    Ok(DMatrix::from_diagonal(&DVector::from_vec(phases)))
}

/// Displacement operator `D(α) = exp(α a† − α* a)` in a basis of dimension
/// `dim`.
///
/// See [`DisplacementKernel`] for the construction; callers that displace
/// many times in the same dimension should hold on to a kernel.
pub fn displacement_matrix(alpha: C64, dim: usize) -> Result<DMatrix<C64>> {
    Ok(DisplacementKernel::new(dim)?.matrix(alpha))
}

/// Spectral decomposition of the truncated quadrature `X = a + a†`, from
/// which every displacement in that basis follows.
///
/// With `α = r e^{iφ}` and `ϑ = π/2 − φ`,
/// `D(α) = R(ϑ) exp(i r X) R(ϑ)†`, and `exp(i r X) = U e^{i r Λ} Uᵀ` for the
/// real orthogonal eigenbasis `U` of the tridiagonal `X`. The truncated
/// generator is anti-Hermitian, so the result is unitary in the truncated
/// space to rounding.
#[derive(Debug, Clone)]
pub struct DisplacementKernel {
    dim: usize,
    eigenvectors: DMatrix<f64>,
    eigenvalues: DVector<f64>,
}

impl DisplacementKernel {
    pub fn new(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        let x = DMatrix::from_fn(dim, dim, |i, j| {
            if j == i + 1 {
                (j as f64).sqrt()
            } else if i == j + 1 {
                (i as f64).sqrt()
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(x);
        Ok(DisplacementKernel { dim, eigenvectors: eig.eigenvectors, eigenvalues: eig.eigenvalues })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self, alpha: C64) -> DMatrix<C64> {
        let r = alpha.norm();
        let phi = if r > 0.0 { alpha.arg() } else { 0.0 };
        let u = &self.eigenvectors;
        let phases: Vec<C64> = self.eigenvalues.iter().map(|&lam| C64::from_polar(1.0, r * lam)).collect();
        let rot = rotation_phases(FRAC_PI_2 - phi, self.dim);
        let n = self.dim;
        // (U e^{irΛ})_{jk}
        let scaled = DMatrix::from_fn(n, n, |j, k| phases[k] * u[(j, k)]);
        let mut out = scaled * u.transpose().map(|v| C64::new(v, 0.0));
        for j in 0..n {
            for k in 0..n {
                out[(j, k)] *= rot[j] * rot[k].conj();
            }
        }
        out
    }

    /// Top-left `rows × cols` block of `D(α)`.
    pub fn block(&self, alpha: C64, rows: usize, cols: usize) -> DMatrix<C64> {
        let rows = rows.min(self.dim);
        let cols = cols.min(self.dim);
        let r = alpha.norm();
        let phi = if r > 0.0 { alpha.arg() } else { 0.0 };
        let u = &self.eigenvectors;
        let rot = rotation_phases(FRAC_PI_2 - phi, self.dim);
        let phases: Vec<C64> = self.eigenvalues.iter().map(|&lam| C64::from_polar(1.0, r * lam)).collect();
        let left = DMatrix::from_fn(rows, self.dim, |j, m| phases[m] * u[(j, m)]);
        let right = DMatrix::from_fn(self.dim, cols, |m, k| C64::new(u[(k, m)], 0.0));
        let mut out = left * right;
        for j in 0..rows {
            for k in 0..cols {
                out[(j, k)] *= rot[j] * rot[k].conj();
            }
        }
        out
    }

    /// First column of `D(α)`, i.e. the truncated displaced vacuum.
    pub fn column0(&self, alpha: C64) -> DVector<C64> {
        let r = alpha.norm();
        let phi = if r > 0.0 { alpha.arg() } else { 0.0 };
        let u = &self.eigenvectors;
        let rot = rotation_phases(FRAC_PI_2 - phi, self.dim);
        // R(ϑ)† e_0 = e_0, so only the first row of Uᵀ enters
        let weights: Vec<C64> =
            (0..self.dim).map(|m| C64::from_polar(1.0, r * self.eigenvalues[m]) * u[(0, m)]).collect();
        DVector::from_fn(self.dim, |j, _| {
            let acc: C64 = (0..self.dim).map(|m| weights[m] * u[(j, m)]).sum();
            rot[j] * acc
        })
    }
}

/// Unitary `S = exp((λ/2)(a†² − a²))` with `λ = ln(ratio)`, which scales the
/// position width of every state by `ratio` (and momentum by its inverse):
/// `S† X S = ratio · X`.
pub fn width_scaling_matrix(ratio: f64, dim: usize) -> Result<DMatrix<C64>> {
    check_dim(dim)?;
    if !(ratio > 0.0) || !ratio.is_finite() {
        return Err(Error::param("ratio", format!("width ratio must be positive, got {ratio}")));
    }
    let lambda = ratio.ln();
    // H = i·G is Hermitian for the anti-Hermitian generator G
    let h = DMatrix::from_fn(dim, dim, |i, j| {
        if i == j + 2 {
            // (a†²)_{j+2, j} = √((j+1)(j+2))
            C64::new(0.0, 0.5 * lambda * (((j + 1) * (j + 2)) as f64).sqrt())
        } else if j == i + 2 {
            C64::new(0.0, -0.5 * lambda * (((i + 1) * (i + 2)) as f64).sqrt())
        } else {
            C64::new(0.0, 0.0)
        }
    });
    Ok(expm_neg_i_hermitian(h))
}

/// `exp(−iH)` for Hermitian `H` by eigendecomposition.
pub(crate) fn expm_neg_i_hermitian(h: DMatrix<C64>) -> DMatrix<C64> {
    let eig = SymmetricEigen::new(h);
    let v = eig.eigenvectors;
    let phases =
        DVector::from_iterator(eig.eigenvalues.len(), eig.eigenvalues.iter().map(|&lam| C64::from_polar(1.0, -lam)));
    let mut scaled = v.clone();
    for (k, mut col) in scaled.column_iter_mut().enumerate() {
        col *= phases[k];
    }
    scaled * v.adjoint()
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 {
        Err(Error::InvalidDimension(dim))
    } else {
        Ok(())
    }
}
