//! Preparation → scan → estimators → fits → reports for one config.

use latticetomo::lattice::{solve_well_states, LatticeSpec};
use latticetomo::oscillator::{DensityMatrix, OscillatorSpec};
use latticetomo::prep::{broaden_width, prepare, prepare_coherent, PreparedState};
use latticetomo::tomography::{
    cross_section, fit_gaussian_cross_section, infer_xrms_from_normalization, normalization_report, run_husimi_scan,
    run_husimi_scan_ensemble, run_wigner_scan, CrossSection, GaussianFit, NoiseConfig, NormalizationReport,
    PopulationRecord, QuasiDistributionSample, RotationModel, ScanGrid, ScanMode, ScanOptions, ScanResult,
    XrmsInference,
};
use serde::{Deserialize, Serialize};

use crate::config::{NoiseMode, PrepKind, RotationKind, RunConfig, Shift};
use crate::error::RunError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub run_id: String,
    pub version: String,
    pub seed: u64,
    pub noise_mode: NoiseMode,
    pub scan_mode: ScanMode,
    /// Oscillator that labels the grid.
    pub omega: f64,
    pub x0: f64,
    pub lattice_period: f64,
    pub lattice_depth: f64,
    /// Population discarded during preparation.
    pub lost_population: f64,
    /// Atoms per point in noise mode.
    pub atom_count: Option<u64>,
    pub point_count: usize,
    pub config_echo: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutFit {
    pub angle_index: usize,
    pub angle: f64,
    pub fit: Option<GaussianFit>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultBundle {
    pub metadata: RunMetadata,
    pub records: Vec<PopulationRecord>,
    pub samples: Vec<QuasiDistributionSample>,
    pub cuts: Vec<CrossSection>,
    pub fits: Vec<CutFit>,
    pub normalization: Option<NormalizationReport>,
    pub xrms: Option<XrmsInference>,
    /// Each distinct warning once, in order of first appearance.
    pub warnings: Vec<String>,
}

#[derive(Default)]
struct Warnings(Vec<String>);

impl Warnings {
    fn extend(&mut self, items: impl IntoIterator<Item = String>) {
        for w in items {
            if !self.0.contains(&w) {
                self.0.push(w);
            }
        }
    }
}

/// The state that `config` prepares, with the oscillator that labels it.
pub fn prepared_state(config: &RunConfig) -> Result<(PreparedState, LatticeSpec, OscillatorSpec), RunError> {
    let lattice = config.lattice_spec().map_err(RunError::model("lattice"))?;
    let spec = config.oscillator_spec().map_err(RunError::model("lattice"))?;
    let prep = config.preparation_config().map_err(RunError::model("lattice"))?;
    let mut state = match (&config.preparation.kind, config.preparation.shift) {
        // a length is used as given instead of going through the beam phase
        (PrepKind::Coherent, Shift::Displacement(dx)) => prepare_coherent(dx, &spec, &prep),
        _ => prepare(&prep, &lattice, &spec),
    }
    .map_err(RunError::model("preparation"))?;
    if let Some(width) = config.preparation.broaden_to {
        let broadened = broaden_width(&state.rho, width / spec.x0()).map_err(RunError::model("preparation"))?;
        state.warnings.extend(broadened.warnings);
        state.lost_population += broadened.lost_population;
        state.rho = broadened.rho;
    }
    Ok((state, lattice, spec))
}

fn scan_options(config: &RunConfig, lattice: &LatticeSpec, rho: &DensityMatrix) -> Result<ScanOptions, RunError> {
    let rotation = match config.scan.rotation {
        RotationKind::Harmonic => None,
        RotationKind::Realistic => {
            let basis = solve_well_states(lattice, config.preparation.grid_size, rho.dim())
                .map_err(RunError::model("rotation spectrum"))?;
            Some(RotationModel::from_basis(&basis))
        }
    };
    let noise = match config.noise.mode {
        NoiseMode::Exact => None,
        NoiseMode::Noise => {
            Some(NoiseConfig { atom_count: config.noise.atom_count * config.noise.repetitions, seed: config.seed })
        }
    };
    Ok(ScanOptions { rotation, noise })
}

pub fn run(config: &RunConfig) -> Result<ResultBundle, RunError> {
    let mut warnings = Warnings::default();
    let (state, lattice, spec) = prepared_state(config)?;
    warnings.extend(state.warnings.iter().cloned());
    let rho = &state.rho;

    let grid = config.scan_grid().map_err(RunError::model("scan grid"))?;
    let options = scan_options(config, &lattice, rho)?;
    let ScanResult { records, samples } = match config.scan.mode {
        ScanMode::Husimi if config.scan.ensemble => {
            let model = config.dephasing_model().map_err(RunError::model("dephasing model"))?;
            run_husimi_scan_ensemble(rho, &spec, &model, &grid, &options)
        }
        ScanMode::Husimi => run_husimi_scan(rho, &spec, &grid, &options),
        ScanMode::Wigner => run_wigner_scan(rho, &spec, &grid, config.scan.resolved_levels, &options),
    }
    .map_err(RunError::model("scan"))?;

    let cut_indices =
        if config.output.cuts.is_empty() { vec![peak_angle(&samples, &grid)] } else { config.output.cuts.clone() };
    let mut cuts = Vec::new();
    let mut fits = Vec::new();
    for i in cut_indices {
        match cross_section(&samples, &grid, i) {
            Ok(cut) => {
                if config.scan.mode == ScanMode::Husimi {
                    let (fit, error) = match fit_gaussian_cross_section(&cut) {
                        Ok(f) => (Some(f), None),
                        Err(e) => {
                            warnings.extend([format!("fit of the cut at angle index {i}: {e}")]);
                            (None, Some(e.to_string()))
                        }
                    };
                    fits.push(CutFit { angle_index: i, angle: cut.angle, fit, error });
                }
                cuts.push(cut);
            }
            Err(e) => warnings.extend([format!("cut at angle index {i}: {e}")]),
        }
    }

    let (normalization, xrms) = match config.scan.mode {
        ScanMode::Wigner => {
            (Some(normalization_report(&samples, &grid).map_err(RunError::model("normalization"))?), None)
        }
        ScanMode::Husimi => match infer_xrms_from_normalization(&samples, &grid) {
            Ok(x) => {
                warnings.extend(x.warnings.iter().cloned());
                (None, Some(x))
            }
            Err(e) => {
                warnings.extend([format!("x_rms inference: {e}")]);
                (None, None)
            }
        },
    };

    let metadata = RunMetadata {
        run_id: config.run_id.clone(),
        version: VERSION.to_string(),
        seed: config.seed,
        noise_mode: config.noise.mode,
        scan_mode: config.scan.mode,
        omega: spec.omega(),
        x0: spec.x0(),
        lattice_period: lattice.period(),
        lattice_depth: lattice.depth(),
        lost_population: state.lost_population,
        atom_count: options.noise.map(|n| n.atom_count),
        point_count: grid.len(),
        config_echo: config.to_toml(),
    };
    Ok(ResultBundle { metadata, records, samples, cuts, fits, normalization, xrms, warnings: warnings.0 })
}

/// Runs on a dedicated pool; `threads = 0` uses rayon's default size.
pub fn run_with_threads(config: &RunConfig, threads: usize) -> Result<ResultBundle, RunError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| RunError::Io { path: "<thread pool>".into(), source: std::io::Error::other(e) })?;
    pool.install(|| run(config))
}

/// Angle through the largest sample magnitude; the first one on ties.
fn peak_angle(samples: &[QuasiDistributionSample], grid: &ScanGrid) -> usize {
    let best =
        samples.iter().enumerate().fold(
            (0, f64::MIN),
            |(bk, bv), (k, s)| {
                if s.value.abs() > bv {
                    (k, s.value.abs())
                } else {
                    (bk, bv)
                }
            },
        );
    grid.split(best.0).0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;
    use std::f64::consts::{PI, SQRT_2};

    #[test]
    fn wigner_default_origin_is_negative() {
        let bundle = run(&RunConfig::wigner_default()).unwrap();
        let origin = bundle.samples.iter().find(|s| s.point.displacement == 0.0).unwrap();
        assert!((origin.value + 0.4 / PI).abs() < 1e-6, "{}", origin.value);
        assert!(bundle.normalization.unwrap().ordered);
        assert!(bundle.fits.is_empty());
    }

    #[test]
    fn husimi_ground_run_fits_and_infers_width() {
        let cfg =
            parse_config("[preparation]\ncontamination = 0.0\n[oscillator]\nomega = \"48.33e3 rad/s\"\n").unwrap();
        let bundle = run(&cfg).unwrap();
        let fit = bundle.fits[0].fit.unwrap();
        let x0 = bundle.metadata.x0;
        // Q of the vacuum falls as exp(−d²/4x0²) along the shift d: rms width √2·x0
        assert!((fit.width / (SQRT_2 * x0) - 1.0).abs() < 1e-6, "{} vs {}", fit.width, SQRT_2 * x0);
        assert!((fit.amplitude - 1.0 / PI).abs() < 1e-6);
        let x = bundle.xrms.unwrap();
        assert!((x.x_rms / x0 - 1.0).abs() < 0.02);
    }

    #[test]
    fn warnings_are_unique() {
        let mut w = Warnings::default();
        w.extend(["a".to_string(), "b".to_string(), "a".to_string()]);
        w.extend(["b".to_string(), "c".to_string()]);
        assert_eq!(w.0, ["a", "b", "c"]);
    }

    #[test]
    fn noise_mode_records_atom_count() {
        let cfg = parse_config(
            "[scan]\nangles = 5\ndisplacements = 3\n[noise]\nmode = \"noise\"\natom_count = 100\nrepetitions = 3\n",
        )
        .unwrap();
        let bundle = run(&cfg).unwrap();
        assert_eq!(bundle.metadata.atom_count, Some(300));
        for r in &bundle.records {
            assert_eq!(r.atom_count, Some(300));
            assert!(((r.p0 * 300.0).round() - r.p0 * 300.0).abs() < 1e-9);
        }
    }

    #[test]
    fn realistic_rotation_runs() {
        let cfg = parse_config("[scan]\nangles = 5\ndisplacements = 3\nrotation = \"realistic\"\n").unwrap();
        let bundle = run(&cfg).unwrap();
        assert_eq!(bundle.samples.len(), 15);
    }
}
