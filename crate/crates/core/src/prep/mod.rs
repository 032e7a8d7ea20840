//! Preparation pipelines for the states whose quasi-distributions are
//! reconstructed: filtered ground state, displaced ground state and the
//! shift-hold-shift inverted mixture, plus the inhomogeneous dephasing
//! channel.

mod dephasing;

pub use dephasing::{
    dephase, ensemble_ground_width, inhomogeneous_width_ratio, DephasingModel, SpreadShape, WidthRatio,
    DEFAULT_SAMPLE_COUNT, DEFAULT_TRUNCATION,
};

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::lattice::{
    shifted_hamiltonian_matrix, solve_bound_states, solve_well_states, LatticeSpec, PotentialShift, DEFAULT_GRID_SIZE,
};
use crate::oscillator::{
    displacement_matrix, rotation_matrix, width_scaling_matrix, working_dimension, DensityMatrix, FockVector,
    OscillatorSpec, DEFAULT_DIMENSION,
};
use crate::{Error, Result, C64};

pub const DEFAULT_CONTAMINATION: f64 = 0.10;
pub const MAX_CONTAMINATION: f64 = 0.2;
pub const DEFAULT_SHIFT_PHASE: f64 = PI / 3.0;
pub const DEFAULT_HOLD_TIME: f64 = 80e-6;
pub const DEFAULT_ROTATION_TIME: f64 = 20e-6;
/// Unshifted-well states used to represent the shifted-lattice dynamics.
pub const DEFAULT_WELL_BASIS: usize = 32;
/// Earliest time the inverted mixture is inspected for dephasing, the
/// "several milliseconds" wait for unbound atoms to leave.
pub const DEFAULT_DEPHASING_WAIT: f64 = 5e-3;
pub const COHERENCE_THRESHOLD: f64 = 1e-3;
const MAX_DEPHASING_WAIT: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PreparationKind {
    Ground,
    Coherent,
    Inverted,
    /// A diagonal state with the given populations.
    Explicit {
        populations: Vec<f64>,
    },
}

/// Lower-raise ground filter modeled with actual well eigenstates: the deep
/// state is projected onto the single bound state of a shallow lattice and
/// re-expanded in the deep basis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterModel {
    /// Lattice the state lives in after the filter.
    pub lattice: LatticeSpec,
    /// Depth at the bottom of the ramp, in recoil energies.
    pub filter_depth_er: f64,
    pub grid_size: usize,
}

/// Bound-state limit of a finite well: states beyond `bound_count` are
/// treated as lost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiniteDepth {
    pub period: f64,
    pub bound_count: usize,
}

impl FiniteDepth {
    pub fn from_lattice(lattice: &LatticeSpec, grid_size: usize) -> Result<Self> {
        let basis = solve_bound_states(lattice, grid_size)?;
        Ok(FiniteDepth { period: lattice.period(), bound_count: basis.bound_count })
    }
}

/// Timing of the loss stages. Loss is applied instantaneously; these are
/// carried along as metadata only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossTiming {
    pub ramp_time: f64,
    pub filter_hold: f64,
    pub release_wait: f64,
}

impl Default for LossTiming {
    fn default() -> Self {
        LossTiming { ramp_time: 10e-3, filter_hold: 5e-3, release_wait: 20e-3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreparationConfig {
    pub kind: PreparationKind,
    /// Residual first-excited-state fraction ε after filtering.
    pub contamination: f64,
    /// Lattice phase jump used to displace the state.
    pub shift_phase: f64,
    pub hold_time: f64,
    /// Free rotation of the coherent state before measurement starts.
    pub rotation_time: f64,
    pub dimension: usize,
    pub loss_timing: LossTiming,
    pub filter: Option<FilterModel>,
    pub finite_depth: Option<FiniteDepth>,
    pub well_basis: usize,
    pub grid_size: usize,
    /// Inhomogeneous distribution used to dephase the inverted mixture;
    /// `None` uses a Gaussian with `Δω/ω = 0.4` about the well frequency.
    pub dephasing: Option<DephasingModel>,
    pub dephasing_wait: f64,
}

impl Default for PreparationConfig {
    fn default() -> Self {
        PreparationConfig {
            kind: PreparationKind::Ground,
            contamination: DEFAULT_CONTAMINATION,
            shift_phase: DEFAULT_SHIFT_PHASE,
            hold_time: DEFAULT_HOLD_TIME,
            rotation_time: DEFAULT_ROTATION_TIME,
            dimension: DEFAULT_DIMENSION,
            loss_timing: LossTiming::default(),
            filter: None,
            finite_depth: None,
            well_basis: DEFAULT_WELL_BASIS,
            grid_size: DEFAULT_GRID_SIZE,
            dephasing: None,
            dephasing_wait: DEFAULT_DEPHASING_WAIT,
        }
    }
}

impl PreparationConfig {
    pub fn with_kind(kind: PreparationKind) -> Self {
        PreparationConfig { kind, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=MAX_CONTAMINATION).contains(&self.contamination) {
            return Err(Error::param("contamination", format!("must lie in [0, {MAX_CONTAMINATION}]")));
        }
        if !(self.hold_time >= 0.0) || !self.hold_time.is_finite() {
            return Err(Error::param("hold_time", "must be non-negative"));
        }
        if !(self.rotation_time >= 0.0) || !self.rotation_time.is_finite() {
            return Err(Error::param("rotation_time", "must be non-negative"));
        }
        if !(self.dephasing_wait >= 0.0) {
            return Err(Error::param("dephasing_wait", "must be non-negative"));
        }
        if !self.shift_phase.is_finite() {
            return Err(Error::param("shift_phase", "must be finite"));
        }
        if self.dimension < 2 {
            return Err(Error::InvalidDimension(self.dimension));
        }
        if let Some(model) = &self.dephasing {
            model.validate()?;
        }
        if let PreparationKind::Explicit { populations } = &self.kind {
            validate_populations(populations)?;
        }
        Ok(())
    }
}

/// A prepared state, renormalized to unit trace, with the population
/// discarded along the way.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreparedState {
    pub rho: DensityMatrix,
    pub lost_population: f64,
    pub warnings: Vec<String>,
}

impl PreparedState {
    fn lossless(rho: DensityMatrix) -> Self {
        PreparedState { rho, lost_population: 0.0, warnings: Vec::new() }
    }
}

fn validate_populations(p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::param("populations", "empty"));
    }
    if p.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::param("populations", "must be non-negative"));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::param("populations", format!("sum to {total}, expected 1")));
    }
    Ok(())
}

/// `(1−ε)|0⟩⟨0| + ε|1⟩⟨1|`, or with a [`FilterModel`] the filtered ground
/// state `(1−ε)|φ⟩⟨φ| + ε|1⟩⟨1|` where `φ` is the shallow-lattice ground
/// state written in the deep basis.
pub fn prepare_ground(config: &PreparationConfig) -> Result<PreparedState> {
    config.validate()?;
    let eps = config.contamination;
    let dim = config.dimension;
    match &config.filter {
        None => {
            let mut pops = vec![0.0; dim];
            pops[0] = 1.0 - eps;
            pops[1] = eps;
            Ok(PreparedState::lossless(DensityMatrix::diagonal(&pops)?))
        }
        Some(filter) => filtered_ground(filter, eps, dim),
    }
}

fn filtered_ground(filter: &FilterModel, eps: f64, dim: usize) -> Result<PreparedState> {
    let deep = &filter.lattice;
    let shallow = deep.with_depth(filter.filter_depth_er * deep.recoil_energy())?;
    let shallow_basis = solve_bound_states(&shallow, filter.grid_size)?;
    if shallow_basis.bound_count != 1 {
        return Err(Error::InvalidConfiguration(format!(
            "filter depth {} E_r supports {} bound states, the filter needs exactly one",
            filter.filter_depth_er, shallow_basis.bound_count
        )));
    }
    let deep_basis = solve_well_states(deep, filter.grid_size, dim)?;
    let phi0 = &shallow_basis.wavefunctions[0];
    let amps: Vec<C64> = deep_basis
        .wavefunctions
        .iter()
        .map(|psi| C64::new(psi.iter().zip(phi0).map(|(a, b)| a * b).sum::<f64>() * deep_basis.spacing, 0.0))
        .collect();
    let phi = FockVector::new(amps)?;
    let lost = (1.0 - phi.norm_sqr()).max(0.0);
    let phi = phi.normalized();
    let excited = DensityMatrix::pure(&FockVector::number_state(1, dim)?);
    let rho = DensityMatrix::mixture(&[(1.0 - eps, &phi.to_density_matrix()), (eps, &excited)])?;
    let mut warnings = Vec::new();
    if lost > 1e-6 {
        warnings.push(format!("filtered ground state loses {lost:.2e} outside {dim} deep-lattice states"));
    }
    Ok(PreparedState { rho, lost_population: lost, warnings })
}

/// Displaces the ground state by `β = δx·√(mω/2ħ)` and lets it rotate for
/// `config.rotation_time`.
///
/// The rotated state is placed at `|β|e^{+iωt}`, the orientation in which
/// the reconstructed distributions are read (angles grow with wait time).
/// With [`FiniteDepth`] the state is cut to the bound subspace and the
/// discarded population reported.
pub fn prepare_coherent(delta_x: f64, spec: &OscillatorSpec, config: &PreparationConfig) -> Result<PreparedState> {
    config.validate()?;
    if let Some(fd) = &config.finite_depth {
        if !(delta_x.abs() < 0.5 * fd.period) {
            return Err(Error::param("delta_x", format!("|δx| = {delta_x:e} must stay below half a period")));
        }
    }
    let ground = prepare_ground(config)?;
    let beta = spec.alpha_for_displacement(delta_x);
    let dim = config.dimension;
    let work = working_dimension(dim, beta.abs());
    let d = displacement_matrix(C64::new(beta, 0.0), work)?;
    let r = rotation_matrix(-spec.rotation_angle(config.rotation_time), work)?;
    let u = r * d;
    let full = ground.rho.embedded(work).transform(&u);

    let keep = config.finite_depth.map_or(dim, |fd| fd.bound_count.min(dim));
    let kept = full.truncated(keep);
    let lost = (1.0 - kept.trace()).max(0.0);
    let rho = kept.renormalized()?.embedded(dim);
    let mut warnings = ground.warnings;
    if lost > 1e-3 {
        warnings.push(format!("{lost:.3} of the displaced population lies above the {keep} retained states"));
    }
    Ok(PreparedState { rho, lost_population: ground.lost_population + lost, warnings })
}

/// Shift-hold-shift excitation in a lattice with two bound states.
///
/// The filtered ground state (contamination included) evolves for
/// `hold_time` under the shifted lattice, represented in the lowest
/// `well_basis` states of the unshifted well. Shifting back is sudden, so the
/// state is read off in the unshifted basis; everything above the bound
/// subspace is lost. The remaining two-level state is dephased by the
/// inhomogeneous frequency spread until its coherence is negligible.
pub fn prepare_inverted(lattice: &LatticeSpec, config: &PreparationConfig) -> Result<PreparedState> {
    config.validate()?;
    let basis = solve_well_states(lattice, config.grid_size, config.well_basis.max(2))?;
    if basis.bound_count < 2 {
        return Err(Error::InvalidConfiguration(format!(
            "inverted state needs two bound states, lattice at {:.2} E_r has {}",
            lattice.depth_in_recoils(),
            basis.bound_count
        )));
    }
    let bound = 2;
    let ground = prepare_ground(&PreparationConfig { dimension: basis.len(), ..config.clone() })?;
    let shift = PotentialShift::from_phase(config.shift_phase, lattice.period());
    let hamiltonian = shifted_hamiltonian_matrix(lattice, &basis, shift)?;
    let evolved = ground.rho.transform(&hamiltonian.propagator(config.hold_time));

    let kept = evolved.truncated(bound);
    let lost = (1.0 - kept.trace()).max(0.0);
    let two_level = kept.renormalized()?;

    let model = config.dephasing.unwrap_or_else(|| DephasingModel::gaussian(lattice.well_frequency(), 0.4));
    let rho = dephase_until_incoherent(&two_level, &model, config.dephasing_wait)?.embedded(config.dimension);

    let mut warnings = ground.warnings;
    warnings.push(format!("{lost:.3} of the population left the bound subspace during the hold"));
    Ok(PreparedState { rho, lost_population: ground.lost_population + lost, warnings })
}

fn coherences_negligible(rho: &DensityMatrix) -> bool {
    let n = rho.dim();
    (0..n).all(|i| {
        (i + 1..n).all(|j| {
            let scale = (rho.element(i, i).re * rho.element(j, j).re).sqrt();
            rho.element(i, j).norm() <= COHERENCE_THRESHOLD * scale
        })
    })
}

/// Dephases from `start` onward, stepping in small increments of the
/// dephasing phase, until every coherence is below the threshold.
fn dephase_until_incoherent(rho: &DensityMatrix, model: &DephasingModel, start: f64) -> Result<DensityMatrix> {
    if coherences_negligible(rho) {
        return Ok(rho.clone());
    }
    let spread = model.relative_spread * model.mean_omega;
    if spread == 0.0 {
        return Err(Error::NumericalFailure("coherent state cannot dephase without a frequency spread".into()));
    }
    let order = (rho.dim() - 1).max(1) as f64;
    let step = 0.05 / (spread * order);
    let mut t = start;
    while t <= MAX_DEPHASING_WAIT {
        let out = dephase(rho, model, t)?;
        if coherences_negligible(&out) {
            return Ok(out);
        }
        t += step;
    }
    Err(Error::NumericalFailure(format!("coherences survive {MAX_DEPHASING_WAIT} s of dephasing")))
}

/// `diag(p₀, p₁, 0, …)` in the default basis.
pub fn make_inverted_reference(p0: f64, p1: f64) -> Result<DensityMatrix> {
    validate_populations(&[p0, p1])?;
    let mut pops = vec![0.0; DEFAULT_DIMENSION];
    pops[0] = p0;
    pops[1] = p1;
    DensityMatrix::diagonal(&pops)
}

/// Stretches every position width by `ratio`, e.g. to represent the
/// ensemble-averaged ground width with a single-frequency state. Computed
/// in the working basis and cut back to `rho`'s dimension.
pub fn broaden_width(rho: &DensityMatrix, ratio: f64) -> Result<PreparedState> {
    let dim = rho.dim();
    let work = dim + 24;
    let s = width_scaling_matrix(ratio, work)?;
    let kept = rho.embedded(work).transform(&s).truncated(dim);
    let lost = (1.0 - kept.trace() / rho.trace()).max(0.0);
    let mut state = PreparedState::lossless(kept.renormalized()?);
    state.lost_population = lost;
    if lost > 1e-6 {
        state.warnings.push(format!("width scaling leaks {lost:.2e} beyond {dim} states"));
    }
    Ok(state)
}

/// Runs the pipeline selected by `config.kind`.
pub fn prepare(config: &PreparationConfig, lattice: &LatticeSpec, spec: &OscillatorSpec) -> Result<PreparedState> {
    match &config.kind {
        PreparationKind::Ground => prepare_ground(config),
        PreparationKind::Coherent => {
            let dx = PotentialShift::from_phase(config.shift_phase, lattice.period()).displacement();
            prepare_coherent(dx, spec, config)
        }
        PreparationKind::Inverted => prepare_inverted(lattice, config),
        PreparationKind::Explicit { populations } => {
            config.validate()?;
            let mut pops = populations.clone();
            pops.resize(pops.len().max(config.dimension), 0.0);
            Ok(PreparedState::lossless(DensityMatrix::diagonal(&pops)?))
        }
    }
}
