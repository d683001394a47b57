//! Physical quantities with unit suffixes, e.g. `"20 MHz"`, `"-50 dBm"`.

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Power,
    Frequency,
    Time,
    Distance,
    /// Linear number or decibels (`"-30 dB"`).
    Gain,
}

impl Dimension {
    fn example(self) -> &'static str {
        match self {
            Dimension::Power => "\"1 W\", \"100 mW\" or \"-50 dBm\"",
            Dimension::Frequency => "\"20 MHz\"",
            Dimension::Time => "\"1 s\" or \"50 ms\"",
            Dimension::Distance => "\"2 m\"",
            Dimension::Gain => "\"-30 dB\" or a plain number",
        }
    }

    fn scale(self, unit: &str) -> Option<Scale> {
        use Scale::*;
        Some(match (self, unit) {
            (Dimension::Power, "W") => Linear(1.0),
            (Dimension::Power, "mW") => Linear(1e-3),
            (Dimension::Power, "uW") => Linear(1e-6),
            (Dimension::Power, "dBm") => Decibel(1e-3),
            (Dimension::Power, "dBW") => Decibel(1.0),
            (Dimension::Frequency, "Hz") => Linear(1.0),
            (Dimension::Frequency, "kHz") => Linear(1e3),
            (Dimension::Frequency, "MHz") => Linear(1e6),
            (Dimension::Frequency, "GHz") => Linear(1e9),
            (Dimension::Time, "s") => Linear(1.0),
            (Dimension::Time, "ms") => Linear(1e-3),
            (Dimension::Time, "us") => Linear(1e-6),
            (Dimension::Distance, "m") => Linear(1.0),
            (Dimension::Distance, "km") => Linear(1e3),
            (Dimension::Gain, "dB") => Decibel(1.0),
            _ => return None,
        })
    }
}

enum Scale {
    Linear(f64),
    Decibel(f64),
}

/// Parse `text` as a quantity of `dim` in SI units. Gains also accept a bare
/// number; every other dimension needs its unit.
pub fn parse(field: &str, text: &str, dim: Dimension) -> Result<f64> {
    let bad = || Error::Config(format!("{field}: expected {}, got {text:?}", dim.example()));
    let t = text.trim();
    let split = t.find(|c: char| c.is_ascii_alphabetic() && c != 'e' && c != 'E').unwrap_or(t.len());
    // An exponent marker directly followed by a unit letter is part of the unit.
    let (num, unit) = t.split_at(split);
    let value: f64 = num.trim().parse().map_err(|_| bad())?;
    let unit = unit.trim();
    let si = if unit.is_empty() {
        if dim != Dimension::Gain {
            return Err(Error::Config(format!("{field}: missing unit, expected {}", dim.example())));
        }
        value
    } else {
        match dim.scale(unit).ok_or_else(bad)? {
            Scale::Linear(k) => value * k,
            Scale::Decibel(k) => k * 10f64.powf(value / 10.0),
        }
    };
    if !si.is_finite() {
        return Err(bad());
    }
    Ok(si)
}
