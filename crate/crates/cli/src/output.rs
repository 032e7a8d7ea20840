//! Files written for a bundle:
//!
//! ```text
//! <out>/<run_id>/samples.csv    one row per grid point
//! <out>/<run_id>/summary.json   metadata, fits, reports, warnings
//! <out>/<run_id>/config.toml    canonical config echo
//! <out>/cross_sections.csv      cuts of every run, keyed by run id
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use latticetomo::tomography::{
    CrossSection, GridPoint, NormalizationReport, PopulationRecord, QuasiDistributionSample, XrmsInference,
};
use serde::{Deserialize, Serialize};

use crate::error::RunError;
use crate::runner::{CutFit, ResultBundle, RunMetadata};

pub const SAMPLE_HEADER: [&str; 10] =
    ["grid_index", "alpha_magnitude", "theta", "x_m", "p0", "p1", "p_lost", "value", "upper", "lower"];
pub const CUT_HEADER: [&str; 5] = ["run_id", "angle_index", "angle", "position_m", "value"];

/// 17 significant digits, enough to reproduce any f64.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub metadata: RunMetadata,
    pub fits: Vec<CutFit>,
    pub normalization: Option<NormalizationReport>,
    pub xrms: Option<XrmsInference>,
    pub warnings: Vec<String>,
}

impl Summary {
    pub fn of(bundle: &ResultBundle) -> Self {
        Summary {
            metadata: bundle.metadata.clone(),
            fits: bundle.fits.clone(),
            normalization: bundle.normalization,
            xrms: bundle.xrms.clone(),
            warnings: bundle.warnings.clone(),
        }
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> RunError + '_ {
    move |e| match e.into_kind() {
        csv::ErrorKind::Io(source) => RunError::Io { path: path.to_path_buf(), source },
        other => RunError::Format { path: path.to_path_buf(), message: format!("{other:?}") },
    }
}

pub fn sample_rows(bundle: &ResultBundle) -> Vec<[String; 10]> {
    bundle
        .records
        .iter()
        .zip(&bundle.samples)
        .map(|(r, s)| {
            let p = &r.point;
            [
                p.index.to_string(),
                fmt_f64(p.alpha_magnitude),
                fmt_f64(p.angle),
                fmt_f64(p.displacement),
                fmt_f64(r.p0),
                fmt_f64(r.p1),
                fmt_f64(r.p_lost),
                fmt_f64(s.value),
                fmt_f64(s.upper),
                fmt_f64(s.lower),
            ]
        })
        .collect()
}

pub fn write_samples_csv(bundle: &ResultBundle, path: &Path) -> Result<(), RunError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(SAMPLE_HEADER).map_err(csv_err(path))?;
    for row in sample_rows(bundle) {
        w.write_record(&row).map_err(csv_err(path))?;
    }
    w.flush().map_err(RunError::io(path))
}

/// Records and samples as stored in a samples table. Levels above 1 are
/// not part of the table, so `higher` comes back empty.
pub fn read_samples_csv(path: &Path) -> Result<(Vec<PopulationRecord>, Vec<QuasiDistributionSample>), RunError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let header = r.headers().map_err(csv_err(path))?.clone();
    if header.iter().ne(SAMPLE_HEADER) {
        return Err(RunError::Format { path: path.into(), message: format!("unexpected header {header:?}") });
    }
    let mut records = Vec::new();
    let mut samples = Vec::new();
    for (line, row) in r.records().enumerate() {
        let row = row.map_err(csv_err(path))?;
        let bad = |m: String| RunError::Format { path: path.into(), message: format!("row {}: {m}", line + 1) };
        let f = |k: usize| row[k].parse::<f64>().map_err(|e| bad(format!("column {}: {e}", SAMPLE_HEADER[k])));
        let index = row[0].parse::<usize>().map_err(|e| bad(format!("grid_index: {e}")))?;
        let point = GridPoint { index, alpha_magnitude: f(1)?, angle: f(2)?, displacement: f(3)? };
        records.push(PopulationRecord {
            point,
            p0: f(4)?,
            p1: f(5)?,
            higher: Vec::new(),
            p_lost: f(6)?,
            atom_count: None,
        });
        samples.push(QuasiDistributionSample { point, value: f(7)?, upper: f(8)?, lower: f(9)? });
    }
    Ok((records, samples))
}

/// Appends the cuts of every bundle to one table keyed by run id.
pub fn write_cross_sections(bundles: &[&ResultBundle], path: &Path) -> Result<(), RunError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(CUT_HEADER).map_err(csv_err(path))?;
    for b in bundles {
        for (cut, idx) in b.cuts.iter().zip(cut_indices(b)) {
            for (x, v) in cut.positions.iter().zip(&cut.values) {
                w.write_record([
                    b.metadata.run_id.clone(),
                    idx.to_string(),
                    fmt_f64(cut.angle),
                    fmt_f64(*x),
                    fmt_f64(*v),
                ])
                .map_err(csv_err(path))?;
            }
        }
    }
    w.flush().map_err(RunError::io(path))
}

// cut angles are grid angles; recover their index from the samples
fn cut_indices(b: &ResultBundle) -> Vec<usize> {
    let mut angles: Vec<f64> = Vec::new();
    for s in &b.samples {
        if angles.last() != Some(&s.point.angle) {
            angles.push(s.point.angle);
        }
    }
    b.cuts.iter().map(|c: &CrossSection| angles.iter().position(|a| *a == c.angle).unwrap_or(usize::MAX)).collect()
}

/// Writes the per-run files under `out/<run_id>/` and returns their paths.
pub fn emit(bundle: &ResultBundle, out: &Path) -> Result<Vec<PathBuf>, RunError> {
    let dir = out.join(&bundle.metadata.run_id);
    fs::create_dir_all(&dir).map_err(RunError::io(&dir))?;
    let samples = dir.join("samples.csv");
    write_samples_csv(bundle, &samples)?;
    let summary = dir.join("summary.json");
    let json = serde_json::to_string_pretty(&Summary::of(bundle)).expect("summary serializes");
    fs::write(&summary, json + "\n").map_err(RunError::io(&summary))?;
    let config = dir.join("config.toml");
    fs::write(&config, &bundle.metadata.config_echo).map_err(RunError::io(&config))?;
    Ok(vec![samples, summary, config])
}

/// Reads back what [`emit`] wrote. Cross sections are not reloaded.
pub fn load_bundle(dir: &Path) -> Result<ResultBundle, RunError> {
    let summary_path = dir.join("summary.json");
    let text = fs::read_to_string(&summary_path).map_err(RunError::io(&summary_path))?;
    let summary: Summary = serde_json::from_str(&text)
        .map_err(|e| RunError::Format { path: summary_path.clone(), message: e.to_string() })?;
    let (mut records, samples) = read_samples_csv(&dir.join("samples.csv"))?;
    for r in &mut records {
        r.atom_count = summary.metadata.atom_count;
    }
    Ok(ResultBundle {
        metadata: summary.metadata,
        records,
        samples,
        cuts: Vec::new(),
        fits: summary.fits,
        normalization: summary.normalization,
        xrms: summary.xrms,
        warnings: summary.warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;
    use crate::runner::run;

    #[test]
    fn seventeen_digits_round_trip() {
        for v in [0.1, -1.0 / 3.0, 1e-300, 6.02214076e23, 0.0] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_f64(1.0 / 3.0), "3.3333333333333331e-1");
    }

    #[test]
    fn emitted_tables_read_back_exactly() {
        let cfg = parse_config("run_id = \"g\"\n[scan]\nangles = 7\ndisplacements = 4\n").unwrap();
        let bundle = run(&cfg).unwrap();
        let tmp = tempfile::tempdir().unwrap();
        emit(&bundle, tmp.path()).unwrap();
        let back = load_bundle(&tmp.path().join("g")).unwrap();
        assert_eq!(back.samples, bundle.samples);
        assert_eq!(back.metadata, bundle.metadata);
        for (a, b) in back.records.iter().zip(&bundle.records) {
            assert_eq!((a.p0, a.p1, a.p_lost), (b.p0, b.p1, b.p_lost));
        }
        let header = std::fs::read_to_string(tmp.path().join("g/samples.csv")).unwrap();
        assert!(header.starts_with("grid_index,alpha_magnitude,theta,x_m,p0,p1,p_lost,value,upper,lower\n"));
    }

    #[test]
    fn summary_carries_normalization_integrals() {
        let bundle = run(&crate::config::RunConfig::wigner_default()).unwrap();
        let json = serde_json::to_value(Summary::of(&bundle)).unwrap();
        let n = &json["normalization"];
        for key in ["value", "upper", "lower", "ordered"] {
            assert!(!n[key].is_null(), "{key}");
        }
        assert!(json["metadata"]["config_echo"].as_str().unwrap().contains("wigner-inverted"));
    }

    #[test]
    fn cross_sections_keyed_by_run() {
        let ground = run(&parse_config("run_id = \"ground\"\n[preparation]\nkind = \"ground\"\n").unwrap()).unwrap();
        let coherent =
            run(&parse_config("run_id = \"coherent\"\n[preparation]\nkind = \"coherent\"\n").unwrap()).unwrap();
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("cuts.csv");
        write_cross_sections(&[&ground, &coherent], &path).unwrap();
        let mut r = csv::Reader::from_path(&path).unwrap();
        let ids: std::collections::BTreeSet<String> = r.records().map(|x| x.unwrap()[0].to_string()).collect();
        assert_eq!(ids.into_iter().collect::<Vec<_>>(), ["coherent", "ground"]);
    }
}
