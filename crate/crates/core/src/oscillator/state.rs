use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::{Error, Result, C64};

const HERMITIAN_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-9;
const POSITIVITY_TOL: f64 = 1e-9;

/// Pure state expanded over the truncated number basis `|0⟩ … |N−1⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct FockVector {
    amplitudes: DVector<C64>,
    truncation_loss: f64,
}

impl FockVector {
    pub fn new(amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::InvalidDimension(0));
        }
        Ok(FockVector { amplitudes: DVector::from_vec(amplitudes), truncation_loss: 0.0 })
    }

    /// Number state `|n⟩` in a basis of dimension `dim`.
    pub fn number_state(n: usize, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension(0));
        }
        if n >= dim {
            return Err(Error::param("n", format!("level {n} outside basis of dimension {dim}")));
        }
        let mut amplitudes = DVector::zeros(dim);
        amplitudes[n] = C64::new(1.0, 0.0);
        Ok(FockVector { amplitudes, truncation_loss: 0.0 })
    }

    pub(crate) fn from_vector(amplitudes: DVector<C64>) -> Self {
        FockVector { amplitudes, truncation_loss: 0.0 }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amplitudes
    }

    pub fn amplitude(&self, n: usize) -> C64 {
        self.amplitudes[n]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Probability that was cut off by the basis truncation when the state
    /// was constructed (zero for explicitly built vectors).
    pub fn truncation_loss(&self) -> f64 {
        self.truncation_loss
    }

    pub fn apply(&self, op: &DMatrix<C64>) -> FockVector {
        FockVector::from_vector(op * &self.amplitudes)
    }

    /// Zero-pads or truncates to `dim`.
    pub fn resized(&self, dim: usize) -> FockVector {
        let mut v = DVector::zeros(dim);
        for n in 0..dim.min(self.dim()) {
            v[n] = self.amplitudes[n];
        }
        FockVector::from_vector(v)
    }

    pub fn normalized(&self) -> FockVector {
        let norm = self.norm_sqr().sqrt();
        FockVector::from_vector(self.amplitudes.unscale(norm))
    }

    pub fn inner(&self, other: &FockVector) -> C64 {
        self.amplitudes.dotc(&other.amplitudes)
    }

    pub fn to_density_matrix(&self) -> DensityMatrix {
        DensityMatrix::from_matrix_unchecked(&self.amplitudes * self.amplitudes.adjoint())
    }
}

/// Coherent state `|β⟩` truncated to `dim` levels.
///
/// Amplitudes follow `e^{−|β|²/2} βⁿ/√n!`, built by the ratio recurrence so
/// no factorial is ever formed.
pub fn make_coherent(beta: C64, dim: usize) -> Result<FockVector> {
    if dim == 0 {
        return Err(Error::InvalidDimension(0));
    }
    let mut amplitudes = DVector::zeros(dim);
    amplitudes[0] = C64::new((-0.5 * beta.norm_sqr()).exp(), 0.0);
    for n in 1..dim {
        amplitudes[n] = amplitudes[n - 1] * beta / (n as f64).sqrt();
    }
    let kept: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
    Ok(FockVector { amplitudes, truncation_loss: (1.0 - kept).max(0.0) })
}

/// Density operator over the truncated number basis.
///
/// Construction through [`DensityMatrix::new`] checks Hermiticity, a trace of
/// at most one and positivity. A trace below one is allowed and represents
/// population lost to lossy channels; it is exposed by
/// [`DensityMatrix::trace_deficit`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityMatrix {
    #[serde(with = "matrix_serde")]
    elements: DMatrix<C64>,
}

impl DensityMatrix {
    pub fn new(elements: DMatrix<C64>) -> Result<Self> {
        let rho = DensityMatrix { elements };
        rho.validate()?;
        Ok(rho)
    }

    pub(crate) fn from_matrix_unchecked(elements: DMatrix<C64>) -> Self {
        DensityMatrix { elements }
    }

    /// `diag(p₀, p₁, …)`; the probabilities must be non-negative and sum to
    /// at most one.
    pub fn diagonal(populations: &[f64]) -> Result<Self> {
        if populations.is_empty() {
            return Err(Error::InvalidDimension(0));
        }
        if let Some(p) = populations.iter().find(|p| !(**p >= 0.0)) {
            return Err(Error::InvalidState(format!("negative or undefined population {p}")));
        }
        let m = DMatrix::from_fn(populations.len(), populations.len(), |i, j| {
            if i == j {
                C64::new(populations[i], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        DensityMatrix::new(m)
    }

    pub fn vacuum(dim: usize) -> Result<Self> {
        Ok(FockVector::number_state(0, dim)?.to_density_matrix())
    }

    pub fn pure(state: &FockVector) -> Self {
        state.to_density_matrix()
    }

    /// Convex combination `Σ wₖ ρₖ`; all terms must share a dimension.
    pub fn mixture(terms: &[(f64, &DensityMatrix)]) -> Result<Self> {
        let dim = terms.first().map(|(_, r)| r.dim()).ok_or(Error::InvalidDimension(0))?;
        let mut m = DMatrix::zeros(dim, dim);
        for (w, r) in terms {
            if r.dim() != dim {
                return Err(Error::InvalidState("mixture terms have different dimensions".into()));
            }
            m += r.elements.scale(*w);
        }
        DensityMatrix::new(m)
    }

    pub fn dim(&self) -> usize {
        self.elements.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.elements
    }

    pub fn element(&self, i: usize, j: usize) -> C64 {
        self.elements[(i, j)]
    }

    pub fn trace(&self) -> f64 {
        self.elements.diagonal().iter().map(|z| z.re).sum()
    }

    /// `1 − tr ρ`: the population removed by lossy operations.
    pub fn trace_deficit(&self) -> f64 {
        1.0 - self.trace()
    }

    pub fn populations(&self) -> Vec<f64> {
        self.elements.diagonal().iter().map(|z| z.re).collect()
    }

    pub fn max_hermiticity_error(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.elements[(i, j)] - self.elements[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let herm = (&self.elements + self.elements.adjoint()).scale(0.5);
        herm.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Largest off-diagonal magnitude.
    pub fn max_coherence(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    worst = worst.max(self.elements[(i, j)].norm());
                }
            }
        }
        worst
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim() == 0 || self.elements.ncols() != self.dim() {
            return Err(Error::InvalidState("density matrix must be square and non-empty".into()));
        }
        if self.elements.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidState("non-finite matrix element".into()));
        }
        let herm = self.max_hermiticity_error();
        if herm > HERMITIAN_TOL {
            return Err(Error::InvalidState(format!("not Hermitian (max deviation {herm:.3e})")));
        }
        let tr = self.trace();
        if !(-TRACE_TOL..=1.0 + TRACE_TOL).contains(&tr) {
            return Err(Error::InvalidState(format!("trace {tr} outside [0, 1]")));
        }
        let lam = self.min_eigenvalue();
        if lam < -POSITIVITY_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {lam:.3e}")));
        }
        Ok(())
    }

    /// `U ρ U†`.
    pub fn transform(&self, u: &DMatrix<C64>) -> DensityMatrix {
        DensityMatrix::from_matrix_unchecked(u * &self.elements * u.adjoint())
    }

    /// Embeds into a larger basis by zero padding.
    pub fn embedded(&self, dim: usize) -> DensityMatrix {
        assert!(dim >= self.dim(), "embedding cannot shrink the basis");
        let mut m = DMatrix::zeros(dim, dim);
        m.view_mut((0, 0), (self.dim(), self.dim())).copy_from(&self.elements);
        DensityMatrix::from_matrix_unchecked(m)
    }

    /// Keeps the top-left `dim × dim` block; population beyond it shows up
    /// in [`trace_deficit`](Self::trace_deficit).
    pub fn truncated(&self, dim: usize) -> DensityMatrix {
        let dim = dim.min(self.dim());
        DensityMatrix::from_matrix_unchecked(self.elements.view((0, 0), (dim, dim)).into_owned())
    }

    /// Resized to exactly `dim`, padding or truncating as needed.
    pub fn resized(&self, dim: usize) -> DensityMatrix {
        if dim >= self.dim() {
            self.embedded(dim)
        } else {
            self.truncated(dim)
        }
    }

    pub fn renormalized(&self) -> Result<DensityMatrix> {
        let tr = self.trace();
        if !(tr > 0.0) {
            return Err(Error::InvalidState("cannot renormalize a state with zero trace".into()));
        }
        Ok(DensityMatrix::from_matrix_unchecked(self.elements.unscale(tr)))
    }

    /// `⟨ψ|ρ|ψ⟩`, with ψ resized to this basis.
    pub fn expectation_pure(&self, state: &FockVector) -> f64 {
        let v = state.resized(self.dim());
        v.amplitudes().dotc(&(&self.elements * v.amplitudes())).re
    }

    pub fn max_abs_diff(&self, other: &DensityMatrix) -> f64 {
        let dim = self.dim().max(other.dim());
        let a = self.resized(dim);
        let b = other.resized(dim);
        (a.elements - b.elements).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

mod matrix_serde {
    use nalgebra::DMatrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::C64;

    #[derive(Serialize, Deserialize)]
    struct Repr {
        dim: usize,
        re: Vec<f64>,
        im: Vec<f64>,
    }

    pub fn serialize<S: Serializer>(m: &DMatrix<C64>, s: S) -> Result<S::Ok, S::Error> {
        let dim = m.nrows();
        let mut re = Vec::with_capacity(dim * dim);
        let mut im = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                re.push(m[(i, j)].re);
                im.push(m[(i, j)].im);
            }
        }
        Repr { dim, re, im }.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<C64>, D::Error> {
        let r = Repr::deserialize(d)?;
        if r.re.len() != r.dim * r.dim || r.im.len() != r.dim * r.dim {
            return Err(serde::de::Error::custom("matrix element count does not match dimension"));
        }
        Ok(DMatrix::from_fn(r.dim, r.dim, |i, j| C64::new(r.re[i * r.dim + j], r.im[i * r.dim + j])))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn vacuum_coherent() {
        let v = make_coherent(C64::new(0.0, 0.0), 8).unwrap();
        assert_eq!(v.amplitude(0), C64::new(1.0, 0.0));
        assert!((1..8).all(|n| v.amplitude(n) == C64::new(0.0, 0.0)));
        assert_eq!(v.truncation_loss(), 0.0);
    }

    #[test]
    fn coherent_amplitude_ratio() {
        let v = make_coherent(C64::new(0.88, 0.0), 8).unwrap();
        assert_abs_diff_eq!((v.amplitude(1) / v.amplitude(0)).re, 0.88, epsilon = 1e-15);
    }

    #[test]
    fn coherent_truncation_loss_matches_poisson_tail() {
        // Poisson tail for mean 0.7744, summed directly
        let mean: f64 = 0.7744;
        let mut term = (-mean).exp();
        let mut head = 0.0;
        for n in 0..4 {
            if n > 0 {
                term *= mean / n as f64;
            }
            head += term;
        }
        let tail = 1.0 - head;
        let v = make_coherent(C64::new(0.88, 0.0), 4).unwrap();
        assert!(tail < 0.01);
        assert_abs_diff_eq!(v.truncation_loss(), tail, epsilon = 1e-14);
        assert!(v.norm_sqr() <= 1.0 && v.norm_sqr() >= 1.0 - 0.01);
    }

    #[test]
    fn zero_dimension_rejected() {
        assert_eq!(make_coherent(C64::new(1.0, 0.0), 0), Err(Error::InvalidDimension(0)));
        assert!(FockVector::new(vec![]).is_err());
        assert!(DensityMatrix::diagonal(&[]).is_err());
    }

    #[test]
    fn density_matrix_validation() {
        assert!(DensityMatrix::diagonal(&[0.3, 0.7]).is_ok());
        assert!(DensityMatrix::diagonal(&[0.6, 0.7]).is_err());
        assert!(DensityMatrix::diagonal(&[1.2, -0.2]).is_err());
        let mut m = DMatrix::from_element(2, 2, C64::new(0.5, 0.0));
        m[(0, 1)] = C64::new(0.5, 0.1);
        assert!(DensityMatrix::new(m.clone()).is_err());
        m[(1, 0)] = C64::new(0.5, -0.1);
        // Hermitian but with eigenvalue 0.5 − |0.5+0.1i| < 0
        assert!(DensityMatrix::new(m).is_err());
    }

    #[test]
    fn trace_deficit_reports_truncation() {
        let psi = make_coherent(C64::new(1.5, 0.0), 40).unwrap();
        let rho = DensityMatrix::pure(&psi).truncated(3);
        assert!(rho.validate().is_ok());
        assert!(rho.trace_deficit() > 0.1);
        let renorm = rho.renormalized().unwrap();
        assert_abs_diff_eq!(renorm.trace(), 1.0, epsilon = 1e-14);
    }
}
