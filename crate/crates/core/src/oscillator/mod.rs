//! Truncated Fock-space linear algebra for a single harmonic oscillator, and
//! direct evaluation of the Husimi and Wigner quasi-probability functions.
//!
//! All quasi-probability values use the dimensionless convention with the
//! `1/π` prefactor: `Q(α) = ⟨α|ρ|α⟩/π` integrates to one over `d²α`, while
//! `W(α) = Σ(−1)ⁿ p(n|α)/π` integrates to one half. Physical densities follow
//! by dividing by ħ (see [`OscillatorSpec`]).

mod marginal;
pub(crate) mod operators;
mod quasi;
mod spec;
mod state;

pub use marginal::{marginal_x, sample_wigner_grid, Marginal, PhaseSpaceGrid};
pub use operators::{
    displacement_matrix, lowering_operator, number_operator, rotation_matrix, rotation_phases, width_scaling_matrix,
    working_dimension, DisplacementKernel,
};
pub use quasi::{
    displaced_populations, husimi_point, wigner_point_integral, wigner_point_integral_with, wigner_point_parity,
    WignerQuadrature,
};
pub use spec::{OscillatorSpec, PhasePoint};
pub use state::{make_coherent, DensityMatrix, FockVector};

/// Default user-facing basis truncation.
pub const DEFAULT_DIMENSION: usize = 8;
