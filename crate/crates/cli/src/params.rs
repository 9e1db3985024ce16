//! Parsing of command-line values that the core types do not cover.

use std::f64::consts::PI;

use dicert::qmodel::BellFamily;

use crate::CliError;

/// A real number, optionally written as a fraction of π: `0.5`, `pi`,
/// `pi/24`, `2pi/3`, `-pi/12`.
pub fn parse_real(s: &str) -> Result<f64, CliError> {
    let bad = || CliError::Validation(format!("cannot read {s:?} as a number"));
    let t = s.trim().to_ascii_lowercase().replace(['π', ' '], "pi");
    let Some(pos) = t.find("pi") else {
        return t.parse::<f64>().map_err(|_| bad());
    };
    let (head, tail) = (&t[..pos], &t[pos + 2..]);
    let factor = match head.trim_end_matches('*') {
        "" | "+" => 1.0,
        "-" => -1.0,
        h => h.parse::<f64>().map_err(|_| bad())?,
    };
    let divisor = match tail {
        "" => 1.0,
        d => d.strip_prefix('/').ok_or_else(bad)?.parse::<f64>().map_err(|_| bad())?,
    };
    let v = factor * PI / divisor;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad())
    }
}

/// Family name plus its parameter (δ for `I`, γ for `J`, none for modCHSH).
pub fn family(name: &str, parameter: Option<f64>) -> Result<BellFamily, CliError> {
    Ok(dicert::certify::parse_family(name, parameter)?)
}

/// Number of decimals a table entry was printed with.
pub fn decimals(entry: &str) -> usize {
    entry.split_once('.').map_or(0, |(_, frac)| frac.len())
}

/// Half-width of the interval a printed entry stands for: ±0.005 for three
/// or more decimals, ±0.05 otherwise.
pub fn rounding_tolerance(entry: &str) -> f64 {
    if decimals(entry) >= 3 {
        0.005
    } else {
        0.05
    }
}
