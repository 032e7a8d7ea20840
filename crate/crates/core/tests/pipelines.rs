//! Preparation → scan → analysis chains checked against closed forms.

use std::f64::consts::{PI, TAU};

use latticetomo::constants::ATOMIC_MASS_UNIT;
use latticetomo::lattice::{depth_for_frequency, LatticeSpec};
use latticetomo::oscillator::{DensityMatrix, OscillatorSpec};
use latticetomo::prep::{
    broaden_width, ensemble_ground_width, inhomogeneous_width_ratio, prepare_coherent, prepare_ground,
    prepare_inverted, DephasingModel, PreparationConfig, PreparationKind,
};
use latticetomo::tomography::{
    cross_section, fit_gaussian_cross_section, infer_xrms_from_normalization, normalization_report, run_husimi_scan,
    run_husimi_scan_ensemble, run_wigner_scan, ScanGrid, ScanMode, ScanOptions,
};

const M85: f64 = 85.0 * ATOMIC_MASS_UNIT;

fn spec() -> OscillatorSpec {
    OscillatorSpec::new(M85, 48.33e3).unwrap()
}

#[test]
fn stretched_vacuum_cut_matches_gaussian_convolution() {
    // Q is the state's Gaussian convolved with the vacuum: along x the
    // variance is (r² + 1)x0², and the peak is 2r/π(1 + r²)
    let spec = spec();
    let grid = ScanGrid::uniform(27, 25, 25.8e-9, ScanMode::Husimi).unwrap();
    for r in [0.8, 1.0, 1.1] {
        let state = broaden_width(&DensityMatrix::vacuum(16).unwrap(), r).unwrap();
        let scan = run_husimi_scan(&state.rho, &spec, &grid, &ScanOptions::default()).unwrap();
        let fit = fit_gaussian_cross_section(&cross_section(&scan.samples, &grid, 0).unwrap()).unwrap();
        let width = spec.x0() * (1.0 + r * r).sqrt();
        let peak = 2.0 * r / (PI * (1.0 + r * r));
        assert!((fit.width / width - 1.0).abs() < 1e-3, "r = {r}: {} vs {width}", fit.width);
        assert!((fit.amplitude / peak - 1.0).abs() < 1e-3, "r = {r}: {} vs {peak}", fit.amplitude);
    }
}

#[test]
fn ensemble_scan_recovers_inhomogeneous_width() {
    let spec = spec();
    let model = DephasingModel::gaussian(spec.omega(), 0.4);
    let rho = DensityMatrix::vacuum(8).unwrap();
    let grid = ScanGrid::husimi_default();
    let scan = run_husimi_scan_ensemble(&rho, &spec, &model, &grid, &ScanOptions::default()).unwrap();
    let inferred = infer_xrms_from_normalization(&scan.samples, &grid).unwrap();
    let expected = ensemble_ground_width(&model, M85).unwrap();
    assert!((inferred.x_rms / expected - 1.0).abs() < 0.02, "{} vs {expected}", inferred.x_rms);
    let ratio = inhomogeneous_width_ratio(&model).unwrap().numeric;
    assert!((expected / spec.x0() - ratio).abs() < 1e-12);
}

#[test]
fn contaminated_ground_fit_lies_between_pure_states() {
    let spec = spec();
    let grid = ScanGrid::husimi_default();
    let width_for = |eps: f64| {
        let config = PreparationConfig { contamination: eps, ..PreparationConfig::default() };
        let rho = prepare_ground(&config).unwrap().rho;
        let scan = run_husimi_scan(&rho, &spec, &grid, &ScanOptions::default()).unwrap();
        let fit = fit_gaussian_cross_section(&cross_section(&scan.samples, &grid, 0).unwrap()).unwrap();
        (fit.width, fit.amplitude)
    };
    let (w0, a0) = width_for(0.0);
    let (w16, a16) = width_for(0.16);
    assert!((w0 / (2f64.sqrt() * spec.x0()) - 1.0).abs() < 1e-6);
    assert!(w16 > w0 && a16 < a0);
    // the excited admixture vanishes at the origin, so the peak follows the ground fraction
    assert!((a16 / a0 - 0.84).abs() < 0.02);
}

#[test]
fn coherent_preparation_peaks_on_the_rotated_amplitude() {
    let spec = spec();
    let dx = 0.155e-6;
    let config = PreparationConfig { contamination: 0.0, ..PreparationConfig::with_kind(PreparationKind::Coherent) };
    let rho = prepare_coherent(dx, &spec, &config).unwrap().rho;
    let grid = ScanGrid::husimi_default();
    let scan = run_husimi_scan(&rho, &spec, &grid, &ScanOptions::default()).unwrap();
    let best = scan.samples.iter().max_by(|a, b| a.value.total_cmp(&b.value)).unwrap();
    let beta = spec.alpha_for_displacement(dx);
    let theta = spec.rotation_angle(config.rotation_time).rem_euclid(TAU);
    let alpha_step = spec.alpha_for_displacement(25.8e-9);
    assert!((best.point.alpha_magnitude - beta).abs() <= alpha_step);
    assert!((best.point.angle - theta).abs() <= TAU / 26.0);
}

#[test]
fn inverted_pipeline_gives_negative_origin_and_ordered_report() {
    let deep = LatticeSpec::with_depth_in_recoils(780e-9, 49.6f64.to_radians(), 37.0, M85).unwrap();
    let lattice = deep.with_depth(depth_for_frequency(32.2e3, M85, deep.k_l())).unwrap();
    let config = PreparationConfig::with_kind(PreparationKind::Inverted);
    let state = prepare_inverted(&lattice, &config).unwrap();
    let pops = state.rho.populations();
    assert!(pops[1] > pops[0]);

    let spec = OscillatorSpec::new(M85, lattice.well_frequency()).unwrap();
    let grid = ScanGrid::wigner_default();
    let scan = run_wigner_scan(&state.rho, &spec, &grid, 2, &ScanOptions::default()).unwrap();
    let origin = scan.samples[0].value;
    assert!((origin - (pops[0] - pops[1]) / PI).abs() < 1e-9);
    assert!(origin < 0.0);
    let report = normalization_report(&scan.samples, &grid).unwrap();
    assert!(report.ordered && report.lower < report.upper);
}
