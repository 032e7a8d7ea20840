//! Simulated measurement protocol: rotate, displace, read out low-lying
//! populations, and turn them into Husimi and Wigner estimates.
//!
//! A grid point `(|α|, θ)` rotates the state by `R(θ)` and then applies
//! `D†(|α|)`, so the ground-state readout is `⟨α|ρ|α⟩` at `α = |α|e^{iθ}`.

mod analysis;
mod fit;
mod noise;

pub use analysis::{
    cross_section, infer_xrms_from_normalization, normalization_report, CrossSection, NormalizationReport,
    XrmsInference, EDGE_DECAY,
};
pub use fit::{fit_gaussian_cross_section, GaussianFit, MAX_FIT_ITERATIONS};
pub use noise::{sample_shot_noise, NoiseConfig};

use std::f64::consts::{PI, TAU};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::HBAR;
use crate::lattice::BoundStateBasis;
use crate::oscillator::{working_dimension, DensityMatrix, DisplacementKernel, OscillatorSpec, PhasePoint};
use crate::prep::DephasingModel;
use crate::{Error, Result, C64};

pub const HUSIMI_ANGLE_COUNT: usize = 27;
pub const WIGNER_ANGLE_COUNT: usize = 41;
pub const DISPLACEMENT_COUNT: usize = 19;
pub const DISPLACEMENT_STEP: f64 = 25.8e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanMode {
    Husimi,
    Wigner,
}

/// Polar measurement grid. Points are ordered angle-major: index
/// `i·|displacements| + j` is angle `i`, displacement `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanGrid {
    angles: Vec<f64>,
    displacements: Vec<f64>,
    mode: ScanMode,
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] > w[0])
}

impl ScanGrid {
    pub fn new(angles: Vec<f64>, displacements: Vec<f64>, mode: ScanMode) -> Result<Self> {
        if angles.is_empty() || displacements.is_empty() {
            return Err(Error::InvalidConfiguration("scan grid needs at least one angle and one displacement".into()));
        }
        if !strictly_increasing(&angles) || angles[0] < 0.0 || *angles.last().unwrap() > TAU + 1e-12 {
            return Err(Error::InvalidConfiguration("angles must increase strictly within [0, 2π]".into()));
        }
        if !strictly_increasing(&displacements) || displacements[0] < 0.0 {
            return Err(Error::InvalidConfiguration(
                "displacements must be non-negative and strictly increasing".into(),
            ));
        }
        Ok(ScanGrid { angles, displacements, mode })
    }

    /// Evenly spaced angles over `[0, 2π]` (both ends included) and
    /// displacements `0, step, …`.
    pub fn uniform(angle_count: usize, displacement_count: usize, step: f64, mode: ScanMode) -> Result<Self> {
        if angle_count < 2 || displacement_count < 1 || !(step > 0.0) {
            return Err(Error::InvalidConfiguration(
                "uniform grid needs ≥ 2 angles, ≥ 1 shift and a positive step".into(),
            ));
        }
        let displacements = (0..displacement_count).map(|k| k as f64 * step).collect();
        ScanGrid::new(linspace(0.0, TAU, angle_count), displacements, mode)
    }

    /// 27 angles × 19 shifts of 25.8 nm (0–465 nm).
    pub fn husimi_default() -> Self {
        ScanGrid::uniform(HUSIMI_ANGLE_COUNT, DISPLACEMENT_COUNT, DISPLACEMENT_STEP, ScanMode::Husimi).unwrap()
    }

    /// 41 angles × 19 shifts.
    pub fn wigner_default() -> Self {
        ScanGrid::uniform(WIGNER_ANGLE_COUNT, DISPLACEMENT_COUNT, DISPLACEMENT_STEP, ScanMode::Wigner).unwrap()
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn displacements(&self) -> &[f64] {
        &self.displacements
    }

    pub fn mode(&self) -> ScanMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.angles.len() * self.displacements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Same grid with every displacement multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        ScanGrid::new(self.angles.clone(), self.displacements.iter().map(|d| d * factor).collect(), self.mode)
    }

    pub fn with_mode(&self, mode: ScanMode) -> Self {
        ScanGrid { mode, ..self.clone() }
    }

    /// `(angle index, displacement index)` of a flat index.
    pub fn split(&self, index: usize) -> (usize, usize) {
        (index / self.displacements.len(), index % self.displacements.len())
    }

    pub fn point(&self, index: usize, spec: &OscillatorSpec) -> GridPoint {
        let (i, j) = self.split(index);
        let displacement = self.displacements[j];
        GridPoint {
            index,
            angle: self.angles[i],
            displacement,
            alpha_magnitude: spec.alpha_for_displacement(displacement),
        }
    }

    pub fn points(&self, spec: &OscillatorSpec) -> Vec<GridPoint> {
        (0..self.len()).map(|k| self.point(k, spec)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub index: usize,
    pub angle: f64,
    /// Physical shift of the lattice, in metres.
    pub displacement: f64,
    pub alpha_magnitude: f64,
}

impl GridPoint {
    pub fn phase_point(&self) -> PhasePoint {
        PhasePoint::from_polar(self.alpha_magnitude, self.angle)
    }
}

/// Populations read out at one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationRecord {
    pub point: GridPoint,
    pub p0: f64,
    pub p1: f64,
    /// Resolved populations of levels `2, 3, …` below the bound cut.
    pub higher: Vec<f64>,
    /// Everything above the resolved levels, counted as lost.
    pub p_lost: f64,
    /// Number of atoms when the fractions are shot-noise samples.
    pub atom_count: Option<u64>,
}

impl PopulationRecord {
    pub fn is_sampled(&self) -> bool {
        self.atom_count.is_some()
    }

    pub fn total(&self) -> f64 {
        self.p0 + self.p1 + self.higher.iter().sum::<f64>() + self.p_lost
    }

    /// `Σ (−1)ⁿ pₙ` over the resolved levels.
    pub fn parity(&self) -> f64 {
        self.p0 - self.p1 + self.higher.iter().enumerate().map(|(k, p)| if k % 2 == 0 { *p } else { -*p }).sum::<f64>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuasiDistributionSample {
    pub point: GridPoint,
    pub value: f64,
    pub upper: f64,
    pub lower: f64,
}

/// Free evolution used for the rotation step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RotationModel {
    /// `R(θ) = e^{−iθn}`.
    Harmonic,
    /// Evolution for `t = θ/ω` under the well spectrum (energies in joules,
    /// level 0 first).
    Spectrum { energies: Vec<f64> },
}

impl RotationModel {
    pub fn from_basis(basis: &BoundStateBasis) -> Self {
        RotationModel::Spectrum { energies: basis.energies.clone() }
    }

    fn phases(&self, theta: f64, dim: usize, omega: f64) -> Result<Vec<f64>> {
        match self {
            RotationModel::Harmonic => Ok((0..dim).map(|n| n as f64 * theta).collect()),
            RotationModel::Spectrum { energies } => {
                if energies.len() < dim {
                    return Err(Error::InvalidConfiguration(format!(
                        "rotation spectrum has {} levels, state needs {dim}",
                        energies.len()
                    )));
                }
                let t = theta / omega;
                Ok(energies[..dim].iter().map(|e| (e - energies[0]) * t / HBAR).collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ScanOptions {
    pub rotation: Option<RotationModel>,
    pub noise: Option<NoiseConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub records: Vec<PopulationRecord>,
    pub samples: Vec<QuasiDistributionSample>,
}

/// `R(θ) ρ R†(θ)` for a diagonal rotation with level phases `φₙ`.
fn rotate(rho: &DensityMatrix, phases: &[f64]) -> DMatrix<C64> {
    let m = rho.matrix();
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * C64::from_polar(1.0, -(phases[i] - phases[j])))
}

/// `pₙ = ⟨n|D†ρ'D|n⟩` for `n < block.ncols()`, with `block` the top rows of
/// `D(|α|)`.
fn displaced_levels(rotated: &DMatrix<C64>, block: &DMatrix<C64>) -> Vec<f64> {
    let b = rotated * block;
    (0..block.ncols()).map(|n| (0..block.nrows()).map(|i| (block[(i, n)].conj() * b[(i, n)]).re).sum()).collect()
}

struct Protocol {
    work: usize,
    blocks: Vec<DMatrix<C64>>,
}

impl Protocol {
    /// Displacement blocks `D(|α|)[..dim, ..levels]` per grid shift.
    fn new(grid: &ScanGrid, spec: &OscillatorSpec, dim: usize, levels: Option<usize>) -> Result<Self> {
        let max_alpha = grid.displacements.iter().map(|d| spec.alpha_for_displacement(*d)).fold(0.0, f64::max);
        let work = working_dimension(dim, max_alpha);
        let kernel = DisplacementKernel::new(work)?;
        let cols = levels.unwrap_or(work);
        let blocks = grid
            .displacements
            .iter()
            .map(|d| kernel.block(C64::new(spec.alpha_for_displacement(*d), 0.0), dim, cols))
            .collect();
        Ok(Protocol { work, blocks })
    }
}

fn check_mode(grid: &ScanGrid, mode: ScanMode) -> Result<()> {
    if grid.mode != mode {
        return Err(Error::InvalidConfiguration(format!("scan expects a {mode:?} grid, got {:?}", grid.mode)));
    }
    Ok(())
}

fn record_from_levels(point: GridPoint, levels: &[f64], trace: f64, resolved: usize) -> PopulationRecord {
    let known = &levels[..resolved.min(levels.len())];
    let p_lost = (trace - known.iter().sum::<f64>()).max(0.0);
    PopulationRecord {
        point,
        p0: known[0],
        p1: known.get(1).copied().unwrap_or(0.0),
        higher: known.iter().skip(2).copied().collect(),
        p_lost,
        atom_count: None,
    }
}

fn finish(records: Vec<PopulationRecord>, noise: Option<&NoiseConfig>) -> Result<Vec<PopulationRecord>> {
    match noise {
        None => Ok(records),
        Some(cfg) => records.iter().map(|r| sample_shot_noise(r, cfg.atom_count, cfg.seed)).collect(),
    }
}

fn husimi_sample(r: &PopulationRecord) -> QuasiDistributionSample {
    let q = r.p0 / PI;
    QuasiDistributionSample { point: r.point, value: q, upper: q, lower: q }
}

/// Husimi protocol: ground-state population after rotation and
/// displacement, `Q = p₀/π`.
pub fn run_husimi_scan(
    rho: &DensityMatrix,
    spec: &OscillatorSpec,
    grid: &ScanGrid,
    options: &ScanOptions,
) -> Result<ScanResult> {
    check_mode(grid, ScanMode::Husimi)?;
    let records = husimi_records(rho, spec, grid, options.rotation.as_ref(), |th| th)?;
    let records = finish(records, options.noise.as_ref())?;
    let samples = records.iter().map(husimi_sample).collect();
    Ok(ScanResult { records, samples })
}

fn husimi_records(
    rho: &DensityMatrix,
    spec: &OscillatorSpec,
    grid: &ScanGrid,
    rotation: Option<&RotationModel>,
    angle_scale: impl Fn(f64) -> f64 + Sync,
) -> Result<Vec<PopulationRecord>> {
    let dim = rho.dim();
    let protocol = Protocol::new(grid, spec, dim, Some(2))?;
    let rotation = rotation.cloned().unwrap_or(RotationModel::Harmonic);
    let trace = rho.trace();
    let rotated: Vec<DMatrix<C64>> = grid
        .angles
        .iter()
        .map(|&th| Ok(rotate(rho, &rotation.phases(angle_scale(th), dim, spec.omega())?)))
        .collect::<Result<_>>()?;
    Ok((0..grid.len())
        .into_par_iter()
        .map(|k| {
            let (i, j) = grid.split(k);
            let levels = displaced_levels(&rotated[i], &protocol.blocks[j]);
            record_from_levels(grid.point(k, spec), &levels, trace, 2)
        })
        .collect())
}

/// Husimi scan of an inhomogeneous ensemble: each well frequency `ωₖ` has
/// its own ground width, so a lattice shift `x` probes `|α| = x/2x₀(ωₖ)`,
/// and a wait `t = θ/ω̄` rotates by `ωₖt`. Populations are averaged with
/// the model weights; the records keep the nominal `spec` labels.
pub fn run_husimi_scan_ensemble(
    rho: &DensityMatrix,
    spec: &OscillatorSpec,
    model: &DephasingModel,
    grid: &ScanGrid,
    options: &ScanOptions,
) -> Result<ScanResult> {
    check_mode(grid, ScanMode::Husimi)?;
    if options.rotation.is_some() {
        return Err(Error::InvalidConfiguration("ensemble scans use harmonic rotation per well".into()));
    }
    let samples = model.samples()?;
    let mut acc: Vec<PopulationRecord> = Vec::new();
    for (omega, weight) in samples {
        let well = OscillatorSpec::new(spec.mass(), omega)?;
        let ratio = omega / model.mean_omega;
        let recs = husimi_records(rho, &well, grid, None, |th| th * ratio)?;
        if acc.is_empty() {
            acc = recs
                .into_iter()
                .enumerate()
                .map(|(k, r)| PopulationRecord {
                    point: grid.point(k, spec),
                    p0: weight * r.p0,
                    p1: weight * r.p1,
                    higher: Vec::new(),
                    p_lost: weight * r.p_lost,
                    atom_count: None,
                })
                .collect();
        } else {
            for (a, r) in acc.iter_mut().zip(recs) {
                a.p0 += weight * r.p0;
                a.p1 += weight * r.p1;
                a.p_lost += weight * r.p_lost;
            }
        }
    }
    let records = finish(acc, options.noise.as_ref())?;
    let samples = records.iter().map(husimi_sample).collect();
    Ok(ScanResult { records, samples })
}

/// Wigner protocol: levels below `bound_dim` are resolved, everything above
/// is lumped into `p_lost`. A `bound_dim` at or above the working dimension
/// resolves every level, which turns the estimate into the full parity sum.
pub fn run_wigner_scan(
    rho: &DensityMatrix,
    spec: &OscillatorSpec,
    grid: &ScanGrid,
    bound_dim: usize,
    options: &ScanOptions,
) -> Result<ScanResult> {
    check_mode(grid, ScanMode::Wigner)?;
    if bound_dim < 2 {
        return Err(Error::param("bound_dim", "at least the two lowest levels must be resolved"));
    }
    let dim = rho.dim();
    let protocol = Protocol::new(grid, spec, dim, None)?;
    let resolved = bound_dim.min(protocol.work);
    let rotation = options.rotation.clone().unwrap_or(RotationModel::Harmonic);
    let trace = rho.trace();
    let rotated: Vec<DMatrix<C64>> = grid
        .angles
        .iter()
        .map(|&th| Ok(rotate(rho, &rotation.phases(th, dim, spec.omega())?)))
        .collect::<Result<_>>()?;
    let records: Vec<PopulationRecord> = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let (i, j) = grid.split(k);
            let levels = displaced_levels(&rotated[i], &protocol.blocks[j]);
            record_from_levels(grid.point(k, spec), &levels, trace, resolved)
        })
        .collect();
    let records = finish(records, options.noise.as_ref())?;
    let samples = records.iter().map(estimate_wigner).collect();
    Ok(ScanResult { records, samples })
}

/// `W′ = (p₀ − p₁ ± …)/π` with bounds from assigning all lost atoms to the
/// next even (upper) or odd (lower) level.
pub fn estimate_wigner(record: &PopulationRecord) -> QuasiDistributionSample {
    let value = record.parity() / PI;
    let spread = record.p_lost / PI;
    QuasiDistributionSample { point: record.point, value, upper: value + spread, lower: value - spread }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::ATOMIC_MASS_UNIT;
    use crate::oscillator::{displaced_populations, husimi_point, make_coherent, wigner_point_parity};
    use crate::prep::make_inverted_reference;
    use std::f64::consts::FRAC_1_PI;

    fn spec() -> OscillatorSpec {
        OscillatorSpec::new(85.0 * ATOMIC_MASS_UNIT, 48.33e3).unwrap()
    }

    fn random_state(seed: u64, dim: usize) -> DensityMatrix {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(dim, dim, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let m = &a * a.adjoint();
        let tr = m.trace().re;
        DensityMatrix::new(m.unscale(tr)).unwrap()
    }

    #[test]
    fn default_grids() {
        let h = ScanGrid::husimi_default();
        assert_eq!(h.len(), 513);
        assert!((h.angles()[1] - 0.24).abs() < 0.005);
        assert!((h.displacements()[18] - 465e-9).abs() < 1e-9);
        let w = ScanGrid::wigner_default();
        assert_eq!(w.len(), 779);
        assert!((w.angles()[1] - 0.16).abs() < 0.005);
        assert!(*w.angles().last().unwrap() <= TAU);
    }

    #[test]
    fn grid_validation() {
        assert!(ScanGrid::new(vec![0.0, 0.0], vec![0.0], ScanMode::Husimi).is_err());
        assert!(ScanGrid::new(vec![0.0, 7.0], vec![0.0], ScanMode::Husimi).is_err());
        assert!(ScanGrid::new(vec![0.0], vec![-1e-9, 0.0], ScanMode::Husimi).is_err());
        assert!(ScanGrid::new(vec![0.0], vec![0.0, 1e-9], ScanMode::Husimi).is_ok());
        let g = ScanGrid::husimi_default();
        let (i, j) = g.split(40);
        assert_eq!(i * 19 + j, 40);
    }

    #[test]
    fn vacuum_origin_is_one_over_pi() {
        let vac = DensityMatrix::vacuum(4).unwrap();
        let scan = run_husimi_scan(&vac, &spec(), &ScanGrid::husimi_default(), &ScanOptions::default()).unwrap();
        for s in scan.samples.iter().filter(|s| s.point.displacement == 0.0) {
            assert!((s.value - FRAC_1_PI).abs() < 1e-14);
        }
    }

    #[test]
    fn husimi_protocol_matches_definition() {
        let grid = ScanGrid::husimi_default();
        for seed in 0..3 {
            let rho = random_state(seed, 4);
            let scan = run_husimi_scan(&rho, &spec(), &grid, &ScanOptions::default()).unwrap();
            for s in &scan.samples {
                let direct = husimi_point(&rho, s.point.phase_point());
                assert!((s.value - direct).abs() < 1e-10, "{} vs {direct}", s.value);
            }
            for r in &scan.records {
                assert!((r.total() - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn coherent_peak_located() {
        let s = spec();
        let theta = 0.97;
        let rho = make_coherent(C64::from_polar(0.88, theta), 12).unwrap().normalized().to_density_matrix();
        let scan = run_husimi_scan(&rho, &s, &ScanGrid::husimi_default(), &ScanOptions::default()).unwrap();
        let best = scan.samples.iter().max_by(|a, b| a.value.total_cmp(&b.value)).unwrap();
        let da = spec().alpha_for_displacement(DISPLACEMENT_STEP);
        assert!((best.point.alpha_magnitude - 0.88).abs() <= da, "{:?}", best.point);
        assert!((best.point.angle - theta).abs() <= TAU / 26.0, "{:?}", best.point);
    }

    #[test]
    fn wigner_reference_origin_and_loss() {
        let rho = make_inverted_reference(0.3, 0.7).unwrap();
        let scan = run_wigner_scan(&rho, &spec(), &ScanGrid::wigner_default(), 2, &ScanOptions::default()).unwrap();
        let origin = &scan.records[0];
        assert!((origin.p0 - 0.3).abs() < 1e-12 && (origin.p1 - 0.7).abs() < 1e-12 && origin.p_lost < 1e-12);
        assert!((scan.samples[0].value + 0.4 * FRAC_1_PI).abs() < 1e-12);
        for r in &scan.records {
            assert!((r.total() - 1.0).abs() < 1e-9);
        }
        // |α| = 1 by a dedicated grid
        let s = spec();
        let grid = ScanGrid::new(vec![0.0], vec![2.0 * s.x0()], ScanMode::Wigner).unwrap();
        let r = &run_wigner_scan(&rho, &s, &grid, 2, &ScanOptions::default()).unwrap().records[0];
        let full = displaced_populations(&rho, C64::new(1.0, 0.0));
        let oracle: f64 = full[2..].iter().sum();
        assert!(r.p_lost > 0.0 && (r.p_lost - oracle).abs() < 1e-10);
    }

    #[test]
    fn full_parity_matches_definition() {
        let grid = ScanGrid::wigner_default();
        let rho = random_state(7, 4);
        let scan = run_wigner_scan(&rho, &spec(), &grid, usize::MAX, &ScanOptions::default()).unwrap();
        for s in scan.samples.iter().step_by(7) {
            let direct = wigner_point_parity(&rho, s.point.phase_point());
            assert!((s.value - direct).abs() < 1e-8, "{:?}: {} vs {direct}", s.point, s.value);
        }
    }

    #[test]
    fn bounds_sandwich() {
        let rho = make_inverted_reference(0.3, 0.7).unwrap();
        let scan = run_wigner_scan(&rho, &spec(), &ScanGrid::wigner_default(), 2, &ScanOptions::default()).unwrap();
        for (s, r) in scan.samples.iter().zip(&scan.records) {
            assert!(s.lower <= s.value && s.value <= s.upper);
            if r.p_lost > 0.0 {
                assert!(s.lower < s.value && s.value < s.upper);
            }
        }
    }

    #[test]
    fn estimator_arithmetic() {
        let point = ScanGrid::wigner_default().point(0, &spec());
        let rec = |p0, p1, p_lost| PopulationRecord { point, p0, p1, higher: vec![], p_lost, atom_count: None };
        let s = estimate_wigner(&rec(0.3, 0.7, 0.0));
        assert!((s.value + 0.127).abs() < 5e-4 && s.upper == s.value && s.lower == s.value);
        assert!((estimate_wigner(&rec(1.0, 0.0, 0.0)).value - FRAC_1_PI).abs() < 1e-16);
        let s = estimate_wigner(&rec(0.5, 0.3, 0.2));
        assert!((s.value - 0.2 / PI).abs() < 1e-15);
        assert!((s.upper - 0.4 / PI).abs() < 1e-15);
        assert!(s.lower.abs() < 1e-15);
    }

    #[test]
    fn diagonal_states_are_rotationally_symmetric() {
        let rho = DensityMatrix::diagonal(&[0.5, 0.2, 0.2, 0.1]).unwrap();
        let grid = ScanGrid::wigner_default();
        let scan = run_wigner_scan(&rho, &spec(), &grid, 2, &ScanOptions::default()).unwrap();
        let nd = grid.displacements().len();
        for j in 0..nd {
            let ring: Vec<f64> = (0..grid.angles().len()).map(|i| scan.samples[i * nd + j].value).collect();
            let mean = ring.iter().sum::<f64>() / ring.len() as f64;
            let var = ring.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / ring.len() as f64;
            assert!(var < 1e-10);
        }
    }

    #[test]
    fn wrong_mode_rejected() {
        let vac = DensityMatrix::vacuum(2).unwrap();
        assert!(run_husimi_scan(&vac, &spec(), &ScanGrid::wigner_default(), &ScanOptions::default()).is_err());
        assert!(run_wigner_scan(&vac, &spec(), &ScanGrid::husimi_default(), 2, &ScanOptions::default()).is_err());
        assert!(run_wigner_scan(&vac, &spec(), &ScanGrid::wigner_default(), 1, &ScanOptions::default()).is_err());
    }

    #[test]
    fn spectrum_rotation_with_harmonic_levels_matches() {
        let s = spec();
        let rho = random_state(3, 4);
        let grid = ScanGrid::husimi_default();
        let basis = BoundStateBasis::harmonic(s.omega(), 4);
        let opts = ScanOptions { rotation: Some(RotationModel::from_basis(&basis)), noise: None };
        let a = run_husimi_scan(&rho, &s, &grid, &opts).unwrap();
        let b = run_husimi_scan(&rho, &s, &grid, &ScanOptions::default()).unwrap();
        for (x, y) in a.samples.iter().zip(&b.samples) {
            assert!((x.value - y.value).abs() < 1e-12);
        }
        let short = ScanOptions {
            rotation: Some(RotationModel::from_basis(&BoundStateBasis::harmonic(s.omega(), 2))),
            noise: None,
        };
        assert!(run_husimi_scan(&rho, &s, &grid, &short).is_err());
    }
}
