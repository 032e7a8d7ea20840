//! Run configuration: a TOML file in which every physical quantity carries
//! its unit.
//!
//! Parsing goes through a loosely typed mirror of the file ([`FileConfig`])
//! and is then resolved into [`RunConfig`], which holds SI values and has all
//! defaults applied. [`RunConfig::to_toml`] writes the resolved form back out
//! in canonical units, so the echo parses to the identical config.

use std::fmt;
use std::ops::Range;

use latticetomo::constants::{DEFAULT_INTERSECTION_ANGLE, DEFAULT_WAVELENGTH, RB85_MASS};
use latticetomo::lattice::{solve_bound_states, LatticeSpec, PotentialShift, DEFAULT_GRID_SIZE};
use latticetomo::oscillator::{OscillatorSpec, DEFAULT_DIMENSION};
use latticetomo::prep::{
    DephasingModel, FilterModel, FiniteDepth, PreparationConfig, PreparationKind, SpreadShape, DEFAULT_CONTAMINATION,
    DEFAULT_DEPHASING_WAIT, DEFAULT_HOLD_TIME, DEFAULT_ROTATION_TIME, DEFAULT_SAMPLE_COUNT, DEFAULT_SHIFT_PHASE,
    DEFAULT_TRUNCATION, DEFAULT_WELL_BASIS,
};
use latticetomo::tomography::{ScanGrid, ScanMode, DISPLACEMENT_COUNT, DISPLACEMENT_STEP, HUSIMI_ANGLE_COUNT};
use serde::{Deserialize, Serialize};

use crate::units::{format_quantity, parse_quantity, Dimension};

pub const HUSIMI_DEFAULT: &str = include_str!("../defaults/husimi.toml");
pub const WIGNER_DEFAULT: &str = include_str!("../defaults/wigner.toml");

const DEFAULT_RELATIVE_SPREAD: f64 = 0.4;
const DEFAULT_ATOM_COUNT: u64 = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub message: String,
    /// Dotted key path, when the error concerns a single key.
    pub key: Option<String>,
    /// 1-based position in the source text.
    pub line: Option<usize>,
    pub column: Option<usize>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let (Some(l), Some(c)) = (self.line, self.column) {
            write!(f, "line {l}, column {c}: ")?;
        }
        if let Some(k) = &self.key {
            write!(f, "`{k}`: ")?;
        }
        write!(f, "{}", self.message)
    }
}

impl std::error::Error for ConfigError {}

impl ConfigError {
    fn at_key(key: &str, message: impl Into<String>) -> Self {
        ConfigError { message: message.into(), key: Some(key.to_string()), line: None, column: None }
    }

    fn locate(mut self, text: &str) -> Self {
        if self.line.is_none() {
            if let Some(key) = &self.key {
                if let Some(offset) = find_key(text, key) {
                    let (l, c) = line_column(text, offset);
                    self.line = Some(l);
                    self.column = Some(c);
                }
            }
        }
        self
    }
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |s| s.chars().count()) + 1;
    (line, column)
}

/// Byte offset of `leaf = …` inside `[section]`, for dotted keys of depth two.
fn find_key(text: &str, key: &str) -> Option<usize> {
    let (section, leaf) = match key.split_once('.') {
        Some((s, l)) => (Some(s), l),
        None => (None, key),
    };
    let mut current: Option<String> = None;
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let trimmed = line.trim_start();
        if let Some(rest) = trimmed.strip_prefix('[') {
            current = rest.split(']').next().map(|s| s.trim().to_string());
        } else if current.as_deref() == section {
            let name = trimmed.split(['=', ' ']).next().unwrap_or("");
            if name == leaf {
                return Some(offset + line.len() - trimmed.len());
            }
        }
        offset += line.len();
    }
    None
}

// ---- file mirror ----

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    run_id: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lattice: Option<LatticeFile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    oscillator: Option<OscillatorFile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    preparation: Option<PreparationFile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    scan: Option<ScanFile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dephasing: Option<DephasingFile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    noise: Option<NoiseFile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    output: Option<OutputFile>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LatticeFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    wavelength: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    angle: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    depth: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mass: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OscillatorFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    omega: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PreparationFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    kind: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    populations: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    contamination: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    shift: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    hold_time: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rotation_time: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dimension: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    filter_depth: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    finite_depth: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    well_basis: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    grid_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dephasing_wait: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    broaden_to: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScanFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    mode: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    angles: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    displacements: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    step: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    resolved_levels: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rotation: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ensemble: Option<bool>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DephasingFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    relative_spread: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    shape: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    truncation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mean_omega: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NoiseFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    mode: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    atom_count: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    repetitions: Option<u64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    dir: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    cuts: Option<Vec<usize>>,
}

// ---- resolved config ----

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeParams {
    pub wavelength: f64,
    pub angle: f64,
    pub depth_er: f64,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PrepKind {
    Ground,
    Coherent,
    Inverted,
    Explicit(Vec<f64>),
}

/// Lattice shift, given either as a beam phase or as a length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shift {
    Phase(f64),
    Displacement(f64),
}

impl Shift {
    pub fn resolve(self, period: f64) -> PotentialShift {
        match self {
            Shift::Phase(p) => PotentialShift::from_phase(p, period),
            Shift::Displacement(d) => PotentialShift::from_displacement(d, period),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreparationParams {
    pub kind: PrepKind,
    pub contamination: f64,
    pub shift: Shift,
    pub hold_time: f64,
    pub rotation_time: f64,
    pub dimension: usize,
    /// Shallow depth for the realistic ground filter, in recoil energies.
    pub filter_depth_er: Option<f64>,
    /// Cut the prepared state to the bound states of the lattice.
    pub finite_depth: bool,
    pub well_basis: usize,
    pub grid_size: usize,
    pub dephasing_wait: f64,
    /// Target position rms width, applied after preparation.
    pub broaden_to: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RotationKind {
    Harmonic,
    /// Free evolution under the solved well spectrum.
    Realistic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanParams {
    pub mode: ScanMode,
    pub angles: usize,
    pub displacements: usize,
    pub step: f64,
    /// Wigner levels read out individually; the rest counts as lost.
    pub resolved_levels: usize,
    pub rotation: RotationKind,
    /// Average the Husimi scan over the inhomogeneous well ensemble.
    pub ensemble: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DephasingParams {
    pub relative_spread: f64,
    pub shape: SpreadShape,
    pub samples: usize,
    pub mean_omega: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    Exact,
    Noise,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoiseParams {
    pub mode: NoiseMode,
    pub atom_count: u64,
    /// Repeated shots per point. A sum of multinomial draws with equal
    /// probabilities is one draw of the summed atom number, so this is
    /// folded into a single draw of `atom_count·repetitions` atoms.
    pub repetitions: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OutputParams {
    pub dir: Option<String>,
    /// Angle indices at which to cut the sampled distribution; empty picks
    /// the angle through the largest sample.
    pub cuts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub run_id: String,
    pub seed: u64,
    pub lattice: LatticeParams,
    pub omega: Option<f64>,
    pub preparation: PreparationParams,
    pub scan: ScanParams,
    pub dephasing: DephasingParams,
    pub noise: NoiseParams,
    pub output: OutputParams,
}

/// Parses and validates a config, applying defaults for absent keys.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let file: FileConfig = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map(|Range { start, .. }| line_column(text, start)).unzip();
        ConfigError { message: e.message().to_string(), key: None, line, column }
    })?;
    resolve(file).and_then(|c| c.validate().map(|_| c)).map_err(|e| e.locate(text))
}

fn quantity(value: &Option<String>, key: &str, dim: Dimension) -> Result<Option<f64>, ConfigError> {
    value.as_deref().map(|s| parse_quantity(s, dim).map_err(|m| ConfigError::at_key(key, m))).transpose()
}

fn resolve(file: FileConfig) -> Result<RunConfig, ConfigError> {
    let lat = file.lattice.unwrap_or_default();
    let lattice = LatticeParams {
        wavelength: quantity(&lat.wavelength, "lattice.wavelength", Dimension::Length)?.unwrap_or(DEFAULT_WAVELENGTH),
        angle: quantity(&lat.angle, "lattice.angle", Dimension::Angle)?.unwrap_or(DEFAULT_INTERSECTION_ANGLE),
        depth_er: quantity(&lat.depth, "lattice.depth", Dimension::Depth)?.unwrap_or(37.0),
        mass: quantity(&lat.mass, "lattice.mass", Dimension::Mass)?.unwrap_or(RB85_MASS),
    };
    let omega = quantity(&file.oscillator.unwrap_or_default().omega, "oscillator.omega", Dimension::Frequency)?;

    let prep = file.preparation.unwrap_or_default();
    let kind = match (prep.kind.as_deref().unwrap_or("ground"), prep.populations) {
        ("explicit", Some(p)) => PrepKind::Explicit(p),
        ("explicit", None) => {
            return Err(ConfigError::at_key("preparation.populations", "required for kind = \"explicit\""))
        }
        (_, Some(_)) => {
            return Err(ConfigError::at_key("preparation.populations", "only allowed with kind = \"explicit\""))
        }
        ("ground", None) => PrepKind::Ground,
        ("coherent", None) => PrepKind::Coherent,
        ("inverted", None) => PrepKind::Inverted,
        (other, None) => {
            return Err(ConfigError::at_key(
                "preparation.kind",
                format!("unknown kind {other:?}; expected ground, coherent, inverted or explicit"),
            ))
        }
    };
    let shift = match &prep.shift {
        None => Shift::Phase(DEFAULT_SHIFT_PHASE),
        Some(s) => match parse_quantity(s, Dimension::Angle) {
            Ok(p) => Shift::Phase(p),
            Err(_) => Shift::Displacement(parse_quantity(s, Dimension::Length).map_err(|_| {
                ConfigError::at_key(
                    "preparation.shift",
                    format!("expected a phase (rad, deg) or a length (m, nm, …), got {s:?}"),
                )
            })?),
        },
    };
    let preparation = PreparationParams {
        kind,
        contamination: prep.contamination.unwrap_or(DEFAULT_CONTAMINATION),
        shift,
        hold_time: quantity(&prep.hold_time, "preparation.hold_time", Dimension::Time)?.unwrap_or(DEFAULT_HOLD_TIME),
        rotation_time: quantity(&prep.rotation_time, "preparation.rotation_time", Dimension::Time)?
            .unwrap_or(DEFAULT_ROTATION_TIME),
        dimension: prep.dimension.unwrap_or(DEFAULT_DIMENSION),
        filter_depth_er: quantity(&prep.filter_depth, "preparation.filter_depth", Dimension::Depth)?,
        finite_depth: prep.finite_depth.unwrap_or(false),
        well_basis: prep.well_basis.unwrap_or(DEFAULT_WELL_BASIS),
        grid_size: prep.grid_size.unwrap_or(DEFAULT_GRID_SIZE),
        dephasing_wait: quantity(&prep.dephasing_wait, "preparation.dephasing_wait", Dimension::Time)?
            .unwrap_or(DEFAULT_DEPHASING_WAIT),
        broaden_to: quantity(&prep.broaden_to, "preparation.broaden_to", Dimension::Length)?,
    };

    let scan_file = file.scan.unwrap_or_default();
    let mode = match scan_file.mode.as_deref().unwrap_or("husimi") {
        "husimi" => ScanMode::Husimi,
        "wigner" => ScanMode::Wigner,
        other => {
            return Err(ConfigError::at_key("scan.mode", format!("unknown mode {other:?}; expected husimi or wigner")))
        }
    };
    let rotation = match scan_file.rotation.as_deref().unwrap_or("harmonic") {
        "harmonic" => RotationKind::Harmonic,
        "realistic" => RotationKind::Realistic,
        other => {
            return Err(ConfigError::at_key(
                "scan.rotation",
                format!("unknown rotation {other:?}; expected harmonic or realistic"),
            ))
        }
    };
    let scan = ScanParams {
        mode,
        angles: scan_file.angles.unwrap_or(HUSIMI_ANGLE_COUNT),
        displacements: scan_file.displacements.unwrap_or(DISPLACEMENT_COUNT),
        step: quantity(&scan_file.step, "scan.step", Dimension::Length)?.unwrap_or(DISPLACEMENT_STEP),
        resolved_levels: scan_file.resolved_levels.unwrap_or(2),
        rotation,
        ensemble: scan_file.ensemble.unwrap_or(false),
    };

    let deph = file.dephasing.unwrap_or_default();
    let shape = match deph.shape.as_deref().unwrap_or("gaussian") {
        "gaussian" => SpreadShape::Gaussian { truncation: deph.truncation.unwrap_or(DEFAULT_TRUNCATION) },
        s @ ("two_point" | "uniform") => {
            if deph.truncation.is_some() {
                return Err(ConfigError::at_key("dephasing.truncation", "only meaningful for shape = \"gaussian\""));
            }
            if s == "uniform" {
                SpreadShape::Uniform
            } else {
                SpreadShape::TwoPoint
            }
        }
        other => {
            return Err(ConfigError::at_key(
                "dephasing.shape",
                format!("unknown shape {other:?}; expected gaussian, two_point or uniform"),
            ))
        }
    };
    let dephasing = DephasingParams {
        relative_spread: deph.relative_spread.unwrap_or(DEFAULT_RELATIVE_SPREAD),
        shape,
        samples: deph.samples.unwrap_or(DEFAULT_SAMPLE_COUNT),
        mean_omega: quantity(&deph.mean_omega, "dephasing.mean_omega", Dimension::Frequency)?,
    };

    let noise_file = file.noise.unwrap_or_default();
    let noise = NoiseParams {
        mode: match noise_file.mode.as_deref().unwrap_or("exact") {
            "exact" => NoiseMode::Exact,
            "noise" => NoiseMode::Noise,
            other => {
                return Err(ConfigError::at_key(
                    "noise.mode",
                    format!("unknown mode {other:?}; expected exact or noise"),
                ))
            }
        },
        atom_count: noise_file.atom_count.unwrap_or(DEFAULT_ATOM_COUNT),
        repetitions: noise_file.repetitions.unwrap_or(1),
    };

    let out = file.output.unwrap_or_default();
    Ok(RunConfig {
        run_id: file.run_id.unwrap_or_else(|| "run".to_string()),
        seed: file.seed.unwrap_or(0),
        lattice,
        omega,
        preparation,
        scan,
        dephasing,
        noise,
        output: OutputParams { dir: out.dir, cuts: out.cuts.unwrap_or_default() },
    })
}

impl RunConfig {
    pub fn husimi_default() -> Self {
        parse_config(HUSIMI_DEFAULT).expect("bundled default parses")
    }

    pub fn wigner_default() -> Self {
        parse_config(WIGNER_DEFAULT).expect("bundled default parses")
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let id_ok = !self.run_id.is_empty()
            && self.run_id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
        if !id_ok {
            return Err(ConfigError::at_key(
                "run_id",
                "must be non-empty and use only letters, digits, '-', '_' or '.'",
            ));
        }
        let positive = |v: f64, key: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(ConfigError::at_key(key, format!("must be positive, got {v}")))
            }
        };
        positive(self.lattice.wavelength, "lattice.wavelength")?;
        positive(self.lattice.depth_er, "lattice.depth")?;
        positive(self.lattice.mass, "lattice.mass")?;
        if !(self.lattice.angle > 0.0 && self.lattice.angle <= std::f64::consts::PI) {
            return Err(ConfigError::at_key("lattice.angle", "must lie in (0, 180 deg]"));
        }
        if let Some(w) = self.omega {
            positive(w, "oscillator.omega")?;
        }
        let p = &self.preparation;
        if p.hold_time < 0.0 {
            return Err(ConfigError::at_key("preparation.hold_time", "must be non-negative"));
        }
        if p.rotation_time < 0.0 {
            return Err(ConfigError::at_key("preparation.rotation_time", "must be non-negative"));
        }
        if p.dephasing_wait < 0.0 {
            return Err(ConfigError::at_key("preparation.dephasing_wait", "must be non-negative"));
        }
        if let Some(d) = p.filter_depth_er {
            positive(d, "preparation.filter_depth")?;
        }
        if let Some(w) = p.broaden_to {
            positive(w, "preparation.broaden_to")?;
        }
        if p.grid_size < 64 {
            return Err(ConfigError::at_key("preparation.grid_size", "must be at least 64"));
        }
        if self.scan.angles < 2 {
            return Err(ConfigError::at_key("scan.angles", "need at least 2 angles"));
        }
        if self.scan.displacements < 1 {
            return Err(ConfigError::at_key("scan.displacements", "need at least 1 displacement"));
        }
        positive(self.scan.step, "scan.step")?;
        if self.scan.resolved_levels < 2 {
            return Err(ConfigError::at_key("scan.resolved_levels", "at least the two lowest levels must be resolved"));
        }
        if self.scan.ensemble && self.scan.mode != ScanMode::Husimi {
            return Err(ConfigError::at_key("scan.ensemble", "ensemble averaging is only available for husimi scans"));
        }
        if self.scan.ensemble && self.scan.rotation != RotationKind::Harmonic {
            return Err(ConfigError::at_key("scan.ensemble", "ensemble scans rotate harmonically in every well"));
        }
        if let Some(w) = self.dephasing.mean_omega {
            positive(w, "dephasing.mean_omega")?;
        }
        if self.noise.atom_count == 0 {
            return Err(ConfigError::at_key("noise.atom_count", "must be at least 1"));
        }
        if self.noise.repetitions == 0 {
            return Err(ConfigError::at_key("noise.repetitions", "must be at least 1"));
        }
        if self.noise.atom_count.checked_mul(self.noise.repetitions).is_none() {
            return Err(ConfigError::at_key("noise.repetitions", "atom_count · repetitions overflows"));
        }
        if let Some(&c) = self.output.cuts.iter().find(|&&c| c >= self.scan.angles) {
            return Err(ConfigError::at_key(
                "output.cuts",
                format!("angle index {c} is outside the {} scan angles", self.scan.angles),
            ));
        }

        // delegate the model constraints to the core types
        self.lattice_spec().map_err(|e| ConfigError::at_key("lattice", e.to_string()))?;
        self.preparation_config_unchecked()
            .validate()
            .map_err(|e| ConfigError::at_key(&format!("preparation.{}", core_key(&e)), e.to_string()))?;
        self.dephasing_model_with(self.omega.unwrap_or(1.0))
            .validate()
            .map_err(|e| ConfigError::at_key("dephasing", e.to_string()))?;
        Ok(())
    }

    pub fn lattice_spec(&self) -> latticetomo::Result<LatticeSpec> {
        let l = &self.lattice;
        LatticeSpec::with_depth_in_recoils(l.wavelength, l.angle, l.depth_er, l.mass)
    }

    /// Oscillator used for scan labels: the override if given, else the
    /// lattice well frequency.
    pub fn oscillator_spec(&self) -> latticetomo::Result<OscillatorSpec> {
        let lattice = self.lattice_spec()?;
        OscillatorSpec::new(lattice.mass(), self.omega.unwrap_or_else(|| lattice.well_frequency()))
    }

    fn dephasing_model_with(&self, mean_omega: f64) -> DephasingModel {
        DephasingModel {
            mean_omega: self.dephasing.mean_omega.unwrap_or(mean_omega),
            relative_spread: self.dephasing.relative_spread,
            shape: self.dephasing.shape,
            sample_count: self.dephasing.samples,
        }
    }

    pub fn dephasing_model(&self) -> latticetomo::Result<DephasingModel> {
        Ok(self.dephasing_model_with(self.oscillator_spec()?.omega()))
    }

    fn preparation_config_unchecked(&self) -> PreparationConfig {
        let p = &self.preparation;
        let kind = match &p.kind {
            PrepKind::Ground => PreparationKind::Ground,
            PrepKind::Coherent => PreparationKind::Coherent,
            PrepKind::Inverted => PreparationKind::Inverted,
            PrepKind::Explicit(pops) => PreparationKind::Explicit { populations: pops.clone() },
        };
        let shift_phase = match p.shift {
            Shift::Phase(v) => v,
            Shift::Displacement(d) => {
                self.lattice_spec().map_or(0.0, |l| PotentialShift::from_displacement(d, l.period()).phase())
            }
        };
        PreparationConfig {
            kind,
            contamination: p.contamination,
            shift_phase,
            hold_time: p.hold_time,
            rotation_time: p.rotation_time,
            dimension: p.dimension,
            well_basis: p.well_basis,
            grid_size: p.grid_size,
            dephasing_wait: p.dephasing_wait,
            ..PreparationConfig::default()
        }
    }

    /// Core preparation config, with the lattice-dependent parts (filter,
    /// bound-state cut, dephasing model) solved.
    pub fn preparation_config(&self) -> latticetomo::Result<PreparationConfig> {
        let lattice = self.lattice_spec()?;
        let p = &self.preparation;
        let mut config = self.preparation_config_unchecked();
        if let Some(depth) = p.filter_depth_er {
            config.filter = Some(FilterModel { lattice, filter_depth_er: depth, grid_size: p.grid_size });
        }
        if p.finite_depth {
            config.finite_depth = Some(FiniteDepth::from_lattice(&lattice, p.grid_size)?);
        }
        config.dephasing = Some(self.dephasing_model_with(lattice.well_frequency()));
        Ok(config)
    }

    pub fn scan_grid(&self) -> latticetomo::Result<ScanGrid> {
        ScanGrid::uniform(self.scan.angles, self.scan.displacements, self.scan.step, self.scan.mode)
    }

    /// Number of bound states of the configured lattice.
    pub fn bound_count(&self) -> latticetomo::Result<usize> {
        Ok(solve_bound_states(&self.lattice_spec()?, self.preparation.grid_size)?.bound_count)
    }

    /// Canonical TOML form; parsing it yields an identical config.
    pub fn to_toml(&self) -> String {
        let p = &self.preparation;
        let (kind, populations) = match &p.kind {
            PrepKind::Ground => ("ground", None),
            PrepKind::Coherent => ("coherent", None),
            PrepKind::Inverted => ("inverted", None),
            PrepKind::Explicit(v) => ("explicit", Some(v.clone())),
        };
        let shift = match p.shift {
            Shift::Phase(v) => format_quantity(v, Dimension::Angle),
            Shift::Displacement(v) => format_quantity(v, Dimension::Length),
        };
        let (shape, truncation) = match self.dephasing.shape {
            SpreadShape::Gaussian { truncation } => ("gaussian", Some(truncation)),
            SpreadShape::TwoPoint => ("two_point", None),
            SpreadShape::Uniform => ("uniform", None),
        };
        let file = FileConfig {
            run_id: Some(self.run_id.clone()),
            seed: Some(self.seed),
            lattice: Some(LatticeFile {
                wavelength: Some(format_quantity(self.lattice.wavelength, Dimension::Length)),
                angle: Some(format_quantity(self.lattice.angle, Dimension::Angle)),
                depth: Some(format_quantity(self.lattice.depth_er, Dimension::Depth)),
                mass: Some(format_quantity(self.lattice.mass, Dimension::Mass)),
            }),
            oscillator: self.omega.map(|w| OscillatorFile { omega: Some(format_quantity(w, Dimension::Frequency)) }),
            preparation: Some(PreparationFile {
                kind: Some(kind.to_string()),
                populations,
                contamination: Some(p.contamination),
                shift: Some(shift),
                hold_time: Some(format_quantity(p.hold_time, Dimension::Time)),
                rotation_time: Some(format_quantity(p.rotation_time, Dimension::Time)),
                dimension: Some(p.dimension),
                filter_depth: p.filter_depth_er.map(|d| format_quantity(d, Dimension::Depth)),
                finite_depth: Some(p.finite_depth),
                well_basis: Some(p.well_basis),
                grid_size: Some(p.grid_size),
                dephasing_wait: Some(format_quantity(p.dephasing_wait, Dimension::Time)),
                broaden_to: p.broaden_to.map(|w| format_quantity(w, Dimension::Length)),
            }),
            scan: Some(ScanFile {
                mode: Some(match self.scan.mode {
                    ScanMode::Husimi => "husimi".into(),
                    ScanMode::Wigner => "wigner".into(),
                }),
                angles: Some(self.scan.angles),
                displacements: Some(self.scan.displacements),
                step: Some(format_quantity(self.scan.step, Dimension::Length)),
                resolved_levels: Some(self.scan.resolved_levels),
                rotation: Some(match self.scan.rotation {
                    RotationKind::Harmonic => "harmonic".into(),
                    RotationKind::Realistic => "realistic".into(),
                }),
                ensemble: Some(self.scan.ensemble),
            }),
            dephasing: Some(DephasingFile {
                relative_spread: Some(self.dephasing.relative_spread),
                shape: Some(shape.to_string()),
                truncation,
                samples: Some(self.dephasing.samples),
                mean_omega: self.dephasing.mean_omega.map(|w| format_quantity(w, Dimension::Frequency)),
            }),
            noise: Some(NoiseFile {
                mode: Some(match self.noise.mode {
                    NoiseMode::Exact => "exact".into(),
                    NoiseMode::Noise => "noise".into(),
                }),
                atom_count: Some(self.noise.atom_count),
                repetitions: Some(self.noise.repetitions),
            }),
            output: Some(OutputFile { dir: self.output.dir.clone(), cuts: Some(self.output.cuts.clone()) }),
        };
        toml::to_string(&file).expect("config mirror always serializes")
    }
}

/// Config key behind a core validation error.
fn core_key(e: &latticetomo::Error) -> &'static str {
    match e {
        latticetomo::Error::InvalidParameter { name, .. } => match *name {
            "shift_phase" => "shift",
            other => other,
        },
        latticetomo::Error::InvalidDimension(_) => "dimension",
        _ => "kind",
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use latticetomo::lattice::recoil_energy;

    #[test]
    fn empty_text_gives_ground_defaults() {
        let c = parse_config("").unwrap();
        assert_eq!(c.preparation.kind, PrepKind::Ground);
        assert_eq!(c.preparation.contamination, 0.10);
        assert_eq!(c.scan.mode, ScanMode::Husimi);
        assert_eq!(c.noise.mode, NoiseMode::Exact);
    }

    #[test]
    fn empty_preparation_section_is_ground() {
        let c = parse_config("[preparation]\n").unwrap();
        assert_eq!(c.preparation.kind, PrepKind::Ground);
        assert_eq!(c.preparation.contamination, 0.10);
    }

    #[test]
    fn depth_in_recoils_resolves_to_joules() {
        let c = parse_config("[lattice]\ndepth = \"37 Er\"\nmass = \"85 u\"\n").unwrap();
        let l = c.lattice_spec().unwrap();
        let k_l = std::f64::consts::TAU / 780e-9 * (0.5 * 49.6f64.to_radians()).sin();
        let er = recoil_energy(k_l, 85.0 * latticetomo::constants::ATOMIC_MASS_UNIT);
        assert!((l.depth() / (37.0 * er) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn negative_hold_time_names_key() {
        let text = "[preparation]\nkind = \"inverted\"\nhold_time = \"-5 us\"\n";
        let e = parse_config(text).unwrap_err();
        assert_eq!(e.key.as_deref(), Some("preparation.hold_time"));
        assert!(e.message.contains("non-negative"));
        assert_eq!((e.line, e.column), (Some(3), Some(1)));
    }

    #[test]
    fn missing_unit_rejected() {
        let e = parse_config("[lattice]\nwavelength = \"780\"\n").unwrap_err();
        assert_eq!(e.key.as_deref(), Some("lattice.wavelength"));
        assert!(e.message.contains("missing unit"));
        let e = parse_config("[lattice]\nwavelength = 780\n").unwrap_err();
        assert_eq!(e.line, Some(2));
    }

    #[test]
    fn unknown_keys_rejected_with_position() {
        let e = parse_config("seed = 1\n[scan]\nangels = 27\n").unwrap_err();
        assert!(e.message.contains("angels"), "{e}");
        assert_eq!(e.line, Some(3));
        assert!(parse_config("[bogus]\n").is_err());
    }

    #[test]
    fn syntax_error_has_line_and_column() {
        let e = parse_config("seed = 1\nrun_id = \n").unwrap_err();
        assert_eq!(e.line, Some(2));
        assert!(e.column.is_some());
    }

    #[test]
    fn shift_accepts_phase_or_length() {
        let c = parse_config("[preparation]\nshift = \"60 deg\"\n").unwrap();
        assert!(matches!(c.preparation.shift, Shift::Phase(p) if (p - std::f64::consts::FRAC_PI_3).abs() < 1e-15));
        let c = parse_config("[preparation]\nshift = \"155 nm\"\n").unwrap();
        assert_eq!(c.preparation.shift, Shift::Displacement(155.0 * 1e-9));
        assert!(parse_config("[preparation]\nshift = \"3 s\"\n").is_err());
    }

    #[test]
    fn populations_only_with_explicit() {
        assert!(parse_config("[preparation]\npopulations = [0.5, 0.5]\n").is_err());
        assert!(parse_config("[preparation]\nkind = \"explicit\"\n").is_err());
        let e = parse_config("[preparation]\nkind = \"explicit\"\npopulations = [0.5, 0.6]\n").unwrap_err();
        assert_eq!(e.key.as_deref(), Some("preparation.populations"));
    }

    #[test]
    fn contamination_limit_enforced() {
        let e = parse_config("[preparation]\ncontamination = 0.3\n").unwrap_err();
        assert_eq!(e.key.as_deref(), Some("preparation.contamination"));
    }

    #[test]
    fn defaults_describe_the_two_experiments() {
        let h = RunConfig::husimi_default();
        assert_eq!(h.preparation.kind, PrepKind::Coherent);
        assert_eq!(h.lattice.depth_er, 37.0);
        assert_eq!(h.bound_count().unwrap(), 4);
        assert_eq!((h.scan.angles, h.scan.displacements), (27, 19));
        let w = RunConfig::wigner_default();
        assert_eq!(w.scan.mode, ScanMode::Wigner);
        assert_eq!(w.preparation.kind, PrepKind::Explicit(vec![0.3, 0.7]));
        assert_eq!(w.bound_count().unwrap(), 2);
        assert_eq!((w.scan.angles, w.scan.displacements), (41, 19));
    }

    #[test]
    fn echo_round_trips() {
        for c in [RunConfig::husimi_default(), RunConfig::wigner_default(), parse_config("").unwrap()] {
            let echo = c.to_toml();
            let again = parse_config(&echo).unwrap();
            assert_eq!(again, c);
            assert_eq!(again.to_toml(), echo);
        }
    }
}
