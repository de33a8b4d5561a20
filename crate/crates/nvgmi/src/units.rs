//! Strict unit-tagged quantity parsing for experiment configs.
//!
//! Every physical quantity in a config file is written as `"<value> <unit>"`
//! (for example `tau = "5 us"`). A bare number where a unit is required is a
//! config error; this is what prevents silent Tesla/millitesla confusion.

use crate::error::{Error, Result};

/// Physical dimension a config field expects.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Time,
    Frequency,
    MagneticField,
    Voltage,
    Current,
    Length,
}

impl Dimension {
    pub fn name(self) -> &'static str {
        match self {
            Dimension::Time => "time",
            Dimension::Frequency => "frequency",
            Dimension::MagneticField => "magnetic field",
            Dimension::Voltage => "voltage",
            Dimension::Current => "current",
            Dimension::Length => "length",
        }
    }

    fn scale_of(self, unit: &str) -> Option<f64> {
        let table: &[(&str, f64)] = match self {
            Dimension::Time => &[
                ("s", 1.0),
                ("ms", 1e-3),
                ("us", 1e-6),
                ("ns", 1e-9),
                ("ps", 1e-12),
            ],
            Dimension::Frequency => &[("Hz", 1.0), ("kHz", 1e3), ("MHz", 1e6), ("GHz", 1e9)],
            Dimension::MagneticField => &[
                ("T", 1.0),
                ("mT", 1e-3),
                ("uT", 1e-6),
                ("nT", 1e-9),
                ("G", 1e-4),
            ],
            Dimension::Voltage => &[("V", 1.0), ("mV", 1e-3)],
            Dimension::Current => &[("A", 1.0), ("mA", 1e-3), ("uA", 1e-6)],
            Dimension::Length => &[("m", 1.0), ("mm", 1e-3), ("um", 1e-6), ("nm", 1e-9)],
        };
        table
            .iter()
            .find(|(name, _)| *name == unit)
            .map(|(_, scale)| *scale)
    }
}

/// Parse `"<value> <unit>"` into SI units for the given dimension.
/// `path` names the config field for error reporting.
pub fn parse_quantity(text: &str, dim: Dimension, path: &str) -> Result<f64> {
    let trimmed = text.trim();
    let mut parts = trimmed.split_whitespace();
    let value_part = parts
        .next()
        .ok_or_else(|| Error::config(path, "empty quantity"))?;
    let unit_part = parts.next().ok_or_else(|| {
        Error::config(
            path,
            format!("missing unit on {} quantity `{trimmed}`", dim.name()),
        )
    })?;
    if parts.next().is_some() {
        return Err(Error::config(
            path,
            format!("expected `<value> <unit>`, got `{trimmed}`"),
        ));
    }
    let value: f64 = value_part
        .parse()
        .map_err(|_| Error::config(path, format!("cannot parse `{value_part}` as a number")))?;
    if !value.is_finite() {
        return Err(Error::config(path, "quantity must be finite"));
    }
    let scale = dim
        .scale_of(unit_part)
        .ok_or_else(|| Error::config(path, format!("unknown {} unit `{unit_part}`", dim.name())))?;
    Ok(value * scale)
}
