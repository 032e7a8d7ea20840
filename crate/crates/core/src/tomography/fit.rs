use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

use super::CrossSection;

pub const MAX_FIT_ITERATIONS: usize = 200;
const MIN_POINTS: usize = 6;

/// `A·exp(−(r − c)²/2w²)` fitted along a cut.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianFit {
    pub amplitude: f64,
    /// Peak position in the phase plane, `c·(cos θ, sin θ)`, in metres.
    pub center: [f64; 2],
    /// rms width along the cut, in metres.
    pub width: f64,
    /// `‖model − data‖₂`.
    pub residual_norm: f64,
    pub iterations: usize,
}

fn residuals(p: &Vector3<f64>, xs: &[f64], ys: &[f64]) -> Vec<f64> {
    xs.iter().zip(ys).map(|(x, y)| p[0] * (-(x - p[1]).powi(2) / (2.0 * p[2] * p[2])).exp() - y).collect()
}

fn norm(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Levenberg–Marquardt fit started from the moments of the positive part of
/// the data.
pub fn fit_gaussian_cross_section(cut: &CrossSection) -> Result<GaussianFit> {
    let xs = &cut.positions;
    let ys = &cut.values;
    if xs.len() != ys.len() || xs.len() < MIN_POINTS {
        return Err(Error::param("cut", format!("need at least {MIN_POINTS} points, got {}", xs.len())));
    }
    let mass: f64 = ys.iter().map(|y| y.max(0.0)).sum();
    let peak = ys.iter().copied().fold(f64::MIN, f64::max);
    if !(mass > 0.0) || !(peak > 0.0) {
        return Err(Error::param("cut", "no positive peak to fit"));
    }
    let mean = xs.iter().zip(ys).map(|(x, y)| x * y.max(0.0)).sum::<f64>() / mass;
    let var = xs.iter().zip(ys).map(|(x, y)| (x - mean).powi(2) * y.max(0.0)).sum::<f64>() / mass;
    let span = xs.last().unwrap() - xs.first().unwrap();
    if !(xs.first().unwrap() < &mean && &mean < xs.last().unwrap()) {
        return Err(Error::param("cut", "peak is not spanned by the data"));
    }
    let mut p = Vector3::new(peak, mean, var.sqrt().max(1e-6 * span));

    let mut r = residuals(&p, xs, ys);
    let mut cost = norm(&r);
    let mut lambda = 1e-3;
    for iter in 1..=MAX_FIT_ITERATIONS {
        let mut jtj = Matrix3::zeros();
        let mut jtr = Vector3::zeros();
        for (k, x) in xs.iter().enumerate() {
            let d = x - p[1];
            let e = (-d * d / (2.0 * p[2] * p[2])).exp();
            let j = Vector3::new(e, p[0] * e * d / (p[2] * p[2]), p[0] * e * d * d / p[2].powi(3));
            jtj += j * j.transpose();
            jtr += j * r[k];
        }
        let mut accepted = false;
        while lambda < 1e12 {
            let mut a = jtj;
            for i in 0..3 {
                a[(i, i)] *= 1.0 + lambda;
            }
            let Some(step) = a.lu().solve(&(-jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let trial = p + step;
            if trial[2] > 0.0 {
                let tr = residuals(&trial, xs, ys);
                let tc = norm(&tr);
                if tc <= cost {
                    let small = step.component_div(&p.map(|v| v.abs().max(1e-300))).amax() < 1e-12;
                    let stalled = cost - tc <= 1e-15 * cost.max(1e-300);
                    p = trial;
                    r = tr;
                    cost = tc;
                    lambda = (lambda * 0.1).max(1e-15);
                    accepted = true;
                    if small || stalled {
                        return Ok(finish(p, cut, cost, iter));
                    }
                    break;
                }
            }
            lambda *= 10.0;
        }
        if !accepted {
            // no downhill step exists: a stationary point
            let grad = jtr.amax();
            if grad <= 1e-10 * (cost + peak) * peak {
                return Ok(finish(p, cut, cost, iter));
            }
            return Err(Error::FitFailure { iterations: iter, residual: cost });
        }
    }
    Err(Error::FitFailure { iterations: MAX_FIT_ITERATIONS, residual: cost })
}

fn finish(p: Vector3<f64>, cut: &CrossSection, residual_norm: f64, iterations: usize) -> GaussianFit {
    GaussianFit {
        amplitude: p[0],
        center: [p[1] * cut.angle.cos(), p[1] * cut.angle.sin()],
        width: p[2].abs(),
        residual_norm,
        iterations,
    }
}
