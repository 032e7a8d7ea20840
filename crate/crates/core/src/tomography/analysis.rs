use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

use super::{QuasiDistributionSample, ScanGrid};

/// Edge level, relative to the maximum, above which a scan is considered not
/// to have decayed inside the grid.
pub const EDGE_DECAY: f64 = 1e-3;
const ANGLE_TOL: f64 = 1e-9;

/// Values along the line through the origin at `angle`, combining the
/// half-lines at `angle` and `angle + π`. Positions are signed shifts in
/// metres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossSection {
    pub angle: f64,
    pub positions: Vec<f64>,
    pub values: Vec<f64>,
}

fn check_samples(samples: &[QuasiDistributionSample], grid: &ScanGrid) -> Result<()> {
    if samples.len() != grid.len() {
        return Err(Error::InvalidConfiguration(format!(
            "{} samples for a grid of {} points",
            samples.len(),
            grid.len()
        )));
    }
    Ok(())
}

fn wrap(theta: f64) -> f64 {
    theta.rem_euclid(TAU)
}

fn same_angle(a: f64, b: f64) -> bool {
    let d = (wrap(a) - wrap(b)).abs();
    d < ANGLE_TOL || (TAU - d) < ANGLE_TOL
}

pub fn cross_section(samples: &[QuasiDistributionSample], grid: &ScanGrid, angle_index: usize) -> Result<CrossSection> {
    check_samples(samples, grid)?;
    let angles = grid.angles();
    let angle = *angles
        .get(angle_index)
        .ok_or_else(|| Error::param("angle_index", format!("{angle_index} outside {} angles", angles.len())))?;
    let opposite = angles
        .iter()
        .position(|a| same_angle(*a, angle + PI))
        .ok_or_else(|| Error::InvalidConfiguration(format!("grid has no angle opposite {angle:.4} rad")))?;
    let nd = grid.displacements().len();
    let mut positions = Vec::with_capacity(2 * nd);
    let mut values = Vec::with_capacity(2 * nd);
    for j in (0..nd).rev() {
        let d = grid.displacements()[j];
        if d == 0.0 {
            continue;
        }
        positions.push(-d);
        values.push(samples[opposite * nd + j].value);
    }
    for j in 0..nd {
        positions.push(grid.displacements()[j]);
        values.push(samples[angle_index * nd + j].value);
    }
    Ok(CrossSection { angle, positions, values })
}

/// Trapezoid weights over the distinct angles of a full circle, wrapping
/// around; a duplicated `2π` endpoint gets zero weight.
fn periodic_angle_weights(angles: &[f64]) -> Result<Vec<f64>> {
    let n = angles.len();
    let closed = n > 1 && same_angle(angles[0], angles[n - 1]);
    let m = if closed { n - 1 } else { n };
    if m < 3 {
        return Err(Error::InvalidConfiguration("polar quadrature needs at least three distinct angles".into()));
    }
    let distinct = &angles[..m];
    let gap = |a: f64, b: f64| (b - a).rem_euclid(TAU);
    let largest = (0..m).map(|i| gap(distinct[i], distinct[(i + 1) % m])).fold(0.0, f64::max);
    // a full circle is sampled when no gap exceeds a few typical steps
    if largest > 3.0 * TAU / m as f64 {
        return Err(Error::InvalidConfiguration("angles do not cover the full circle".into()));
    }
    let mut w = vec![0.0; n];
    for i in 0..m {
        let prev = distinct[(i + m - 1) % m];
        let next = distinct[(i + 1) % m];
        w[i] = 0.5 * (gap(prev, distinct[i]) + gap(distinct[i], next));
    }
    Ok(w)
}

/// `∫ f(r) r dr` on a ring table by the trapezoid rule.
fn radial_moment(radii: &[f64], values: &[f64]) -> f64 {
    radii.windows(2).zip(values.windows(2)).map(|(r, v)| 0.5 * (r[1] - r[0]) * (r[0] * v[0] + r[1] * v[1])).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XrmsInference {
    pub x_rms: f64,
    /// `∫∫ Q r dr dθ` in m², including any extrapolated tail.
    pub integral: f64,
    /// Tail beyond the grid estimated from a Gaussian fall-off.
    pub extrapolated: bool,
    pub warnings: Vec<String>,
}

/// Solves `∫ Q(r/2x_rms, θ) r/(4x_rms²) dr dθ = 1` for `x_rms`.
///
/// Q is read on the physical displacements of the grid. When the edge ring
/// still exceeds [`EDGE_DECAY`] of the peak, each half-line is continued with
/// the Gaussian through its last two points and a warning is raised.
pub fn infer_xrms_from_normalization(samples: &[QuasiDistributionSample], grid: &ScanGrid) -> Result<XrmsInference> {
    check_samples(samples, grid)?;
    let weights = periodic_angle_weights(grid.angles())?;
    let radii = grid.displacements();
    let nd = radii.len();
    if nd < 2 {
        return Err(Error::InvalidConfiguration("need at least two displacements".into()));
    }
    let mut warnings = Vec::new();
    if radii[0] > 0.0 {
        warnings.push("displacements start away from the origin; the inner disc is not covered".to_string());
    }
    let peak = samples.iter().map(|s| s.value).fold(f64::MIN, f64::max);
    let edge = (0..grid.angles().len()).map(|i| samples[i * nd + nd - 1].value).fold(f64::MIN, f64::max);
    let extrapolated = edge > EDGE_DECAY * peak;

    let mut integral = 0.0;
    for (i, w) in weights.iter().enumerate() {
        if *w == 0.0 {
            continue;
        }
        let ring: Vec<f64> = (0..nd).map(|j| samples[i * nd + j].value).collect();
        let mut moment = radial_moment(radii, &ring);
        if extrapolated {
            let (r1, r2) = (radii[nd - 2], radii[nd - 1]);
            let (q1, q2) = (ring[nd - 2], ring[nd - 1]);
            if q1 > q2 && q2 > 0.0 {
                // Q ∝ exp(−r²/s) through the last two points: ∫_{r2}^∞ Q r dr = q2·s/2
                let s = (r2 * r2 - r1 * r1) / (q1 / q2).ln();
                moment += 0.5 * q2 * s;
            }
        }
        integral += w * moment;
    }
    if extrapolated {
        warnings.push(format!(
            "scan edge at {:.3e} of the peak exceeds {EDGE_DECAY:.0e}; normalization tail extrapolated",
            edge / peak
        ));
    }
    if !(integral > 0.0) {
        return Err(Error::NumericalFailure("non-positive Husimi normalization integral".into()));
    }
    Ok(XrmsInference { x_rms: (integral / 4.0).sqrt(), integral, extrapolated, warnings })
}

/// Integrals of the estimate and its bounds over the polar grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationReport {
    pub value: f64,
    pub upper: f64,
    pub lower: f64,
    /// `lower ≤ value ≤ upper`.
    pub ordered: bool,
}

/// `2∫∫ W |α| d|α| dθ` for the value and both bounds. The factor 2 converts
/// the dimensionless convention (`∫W d²α = ½`) to unit normalization in the
/// `x/2x_rms` axis units of the plots.
pub fn normalization_report(samples: &[QuasiDistributionSample], grid: &ScanGrid) -> Result<NormalizationReport> {
    check_samples(samples, grid)?;
    let weights = periodic_angle_weights(grid.angles())?;
    let nd = grid.displacements().len();
    let mut totals = [0.0; 3];
    for (i, w) in weights.iter().enumerate() {
        if *w == 0.0 {
            continue;
        }
        let ring = &samples[i * nd..(i + 1) * nd];
        let radii: Vec<f64> = ring.iter().map(|s| s.point.alpha_magnitude).collect();
        let surfaces: [fn(&QuasiDistributionSample) -> f64; 3] = [|s| s.value, |s| s.upper, |s| s.lower];
        for (total, pick) in totals.iter_mut().zip(surfaces) {
            let vals: Vec<f64> = ring.iter().map(pick).collect();
            *total += w * radial_moment(&radii, &vals);
        }
    }
    let [value, upper, lower] = totals.map(|t| 2.0 * t);
    Ok(NormalizationReport { value, upper, lower, ordered: lower <= value && value <= upper })
}
