//! Quantities with mandatory unit strings, e.g. `"780 nm"` or `"37 Er"`.
//!
//! Everything is converted to SI plus radians. Depths stay in recoil
//! energies because their conversion needs the lattice geometry.

use std::f64::consts::{PI, TAU};

use latticetomo::constants::ATOMIC_MASS_UNIT;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Length,
    Angle,
    Time,
    /// Angular frequency, rad/s.
    Frequency,
    Mass,
    /// Lattice depth in recoil energies.
    Depth,
}

impl Dimension {
    fn units(self) -> &'static [(&'static str, f64)] {
        match self {
            Dimension::Length => &[("m", 1.0), ("mm", 1e-3), ("um", 1e-6), ("μm", 1e-6), ("nm", 1e-9)],
            Dimension::Angle => &[("rad", 1.0), ("mrad", 1e-3), ("deg", PI / 180.0)],
            Dimension::Time => &[("s", 1.0), ("ms", 1e-3), ("us", 1e-6), ("μs", 1e-6), ("ns", 1e-9)],
            // Hz and kHz are cycles per second; ω = 2πf
            Dimension::Frequency => &[("rad/s", 1.0), ("krad/s", 1e3), ("Hz", TAU), ("kHz", TAU * 1e3)],
            Dimension::Mass => &[("kg", 1.0), ("u", ATOMIC_MASS_UNIT)],
            Dimension::Depth => &[("Er", 1.0)],
        }
    }

    /// Unit used when writing values back out. The factor is exactly 1 so
    /// that the echo round-trips bit for bit.
    pub fn canonical_unit(self) -> &'static str {
        match self {
            Dimension::Length => "m",
            Dimension::Angle => "rad",
            Dimension::Time => "s",
            Dimension::Frequency => "rad/s",
            Dimension::Mass => "kg",
            Dimension::Depth => "Er",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Dimension::Length => "length",
            Dimension::Angle => "angle",
            Dimension::Time => "time",
            Dimension::Frequency => "angular frequency",
            Dimension::Mass => "mass",
            Dimension::Depth => "depth",
        }
    }

    fn accepted(self) -> String {
        self.units().iter().map(|(u, _)| *u).collect::<Vec<_>>().join(", ")
    }
}

/// Splits `"<number> <unit>"`; the space is optional.
fn split(text: &str) -> Option<(f64, &str)> {
    let t = text.trim();
    let end = t
        .char_indices()
        .find(|&(i, c)| {
            !(c.is_ascii_digit()
                || c == '.'
                || c == '+'
                || c == '-'
                || ((c == 'e' || c == 'E') && i > 0 && is_exponent(t, i)))
        })
        .map_or(t.len(), |(i, _)| i);
    let value: f64 = t[..end].trim().parse().ok()?;
    Some((value, t[end..].trim()))
}

// `e` counts as part of the number only when followed by a digit or sign
fn is_exponent(t: &str, i: usize) -> bool {
    t[i + 1..].chars().next().is_some_and(|c| c.is_ascii_digit() || c == '+' || c == '-')
}

pub fn parse_quantity(text: &str, dim: Dimension) -> Result<f64, String> {
    let (value, unit) =
        split(text).ok_or_else(|| format!("expected \"<number> <unit>\" for a {}, got {text:?}", dim.name()))?;
    if unit.is_empty() {
        return Err(format!("missing unit in {text:?}; accepted {} units: {}", dim.name(), dim.accepted()));
    }
    let factor = dim
        .units()
        .iter()
        .find(|(u, _)| *u == unit)
        .map(|(_, f)| *f)
        .ok_or_else(|| format!("unknown {} unit {unit:?}; accepted: {}", dim.name(), dim.accepted()))?;
    if !value.is_finite() {
        return Err(format!("{text:?} is not finite"));
    }
    Ok(if factor == 1.0 { value } else { value * factor })
}

/// Shortest round-tripping representation in the canonical unit.
pub fn format_quantity(value: f64, dim: Dimension) -> String {
    format!("{value:e} {}", dim.canonical_unit())
}
