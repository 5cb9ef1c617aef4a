//! Quantities with unit suffixes, e.g. `"140 fs"` or `"-11.1 fs^2/mm"`.
//!
//! Bare numbers are taken as SI.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Time,
    Length,
    Energy,
    /// β₂, s²/m.
    Gvd,
    /// β₃, s³/m.
    Tod,
    /// dB/km.
    Attenuation,
    Temperature,
    /// dBm.
    PowerLevel,
    Area,
    /// n₂, m²/W.
    Nonlinearity,
    Dimensionless,
}

impl Dimension {
    fn units(self) -> &'static [(&'static str, f64)] {
        match self {
            Dimension::Time => &[("s", 1.0), ("ms", 1e-3), ("us", 1e-6), ("µs", 1e-6), ("ns", 1e-9), ("ps", 1e-12), ("fs", 1e-15)],
            Dimension::Length => &[("m", 1.0), ("km", 1e3), ("cm", 1e-2), ("mm", 1e-3), ("um", 1e-6), ("µm", 1e-6), ("nm", 1e-9)],
            Dimension::Energy => &[("J", 1.0), ("mJ", 1e-3), ("uJ", 1e-6), ("nJ", 1e-9), ("pJ", 1e-12), ("fJ", 1e-15)],
            Dimension::Gvd => &[("s^2/m", 1.0), ("fs^2/mm", 1e-27), ("ps^2/km", 1e-27), ("fs^2/m", 1e-30), ("ps^2/m", 1e-24)],
            Dimension::Tod => &[("s^3/m", 1.0), ("fs^3/mm", 1e-42), ("ps^3/km", 1e-39), ("fs^3/m", 1e-45)],
            Dimension::Attenuation => &[("dB/km", 1.0), ("dB/m", 1e3)],
            Dimension::Temperature => &[("K", 1.0)],
            Dimension::PowerLevel => &[("dBm", 1.0)],
            Dimension::Area => &[("m^2", 1.0), ("um^2", 1e-12), ("µm^2", 1e-12)],
            Dimension::Nonlinearity => &[("m^2/W", 1.0)],
            Dimension::Dimensionless => &[],
        }
    }
}

/// A config value: a number in SI (or the dimension's base unit) or a
/// string carrying a unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Quantity {
    Number(f64),
    Text(String),
}

impl From<f64> for Quantity {
    fn from(v: f64) -> Self {
        Quantity::Number(v)
    }
}

impl Quantity {
    pub fn resolve(&self, key: &str, dim: Dimension) -> Result<f64> {
        match self {
            Quantity::Number(v) => Ok(*v),
            Quantity::Text(s) => parse_quantity(s, dim).map_err(|e| Error::Config(format!("{key}: {e}"))),
        }
    }
}

pub fn parse_quantity(text: &str, dim: Dimension) -> std::result::Result<f64, String> {
    let t = text.trim();
    let split = t
        .char_indices()
        .find(|&(i, c)| {
            !(c.is_ascii_digit() || c == '.' || c == '+' || c == '-' || ((c == 'e' || c == 'E') && i > 0 && t[i + 1..].starts_with(|d: char| d.is_ascii_digit() || d == '-' || d == '+')))
        })
        .map(|(i, _)| i)
        .unwrap_or(t.len());
    let (num, unit) = t.split_at(split);
    let value: f64 = num.trim().parse().map_err(|_| format!("cannot read a number from `{text}`"))?;
    let unit = unit.trim();
    if unit.is_empty() {
        return Ok(value);
    }
    dim.units()
        .iter()
        .find(|(u, _)| *u == unit)
        .map(|(_, f)| value * f)
        .ok_or_else(|| {
            let known: Vec<&str> = dim.units().iter().map(|(u, _)| *u).collect();
            format!("unknown unit `{unit}` (expected one of {})", known.join(", "))
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * b.abs()
    }

    #[test]
    fn fiber_quantities() {
        assert!(close(parse_quantity("140 fs", Dimension::Time).unwrap(), 140e-15));
        assert!(close(parse_quantity("13.2 m", Dimension::Length).unwrap(), 13.2));
        assert!(close(parse_quantity("-11.1 fs^2/mm", Dimension::Gvd).unwrap(), -11.1e-27));
        assert!(close(parse_quantity("83.8 fs^3/mm", Dimension::Tod).unwrap(), 83.8e-42));
        assert!(close(parse_quantity("5.7 um", Dimension::Length).unwrap(), 5.7e-6));
        assert!(close(parse_quantity("1499.5nm", Dimension::Length).unwrap(), 1499.5e-9));
        assert!(close(parse_quantity("98.6 pJ", Dimension::Energy).unwrap(), 98.6e-12));
        assert!(close(parse_quantity("-85.1 dBm", Dimension::PowerLevel).unwrap(), -85.1));
        assert!(close(parse_quantity("2.9e-20 m^2/W", Dimension::Nonlinearity).unwrap(), 2.9e-20));
        assert!(close(parse_quantity("1e-12", Dimension::Energy).unwrap(), 1e-12));
    }

    #[test]
    fn bad_units() {
        assert!(parse_quantity("140 furlongs", Dimension::Time).is_err());
        assert!(parse_quantity("fs", Dimension::Time).is_err());
        assert!(parse_quantity("3 K", Dimension::Energy).is_err());
    }
}
